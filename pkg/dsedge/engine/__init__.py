# Simulation engine
