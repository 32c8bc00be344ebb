# Core simulation model
