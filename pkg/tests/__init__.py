"""
dsedge Test Suite
==================

Tests for the dsedge DiffServ edge router simulator.
"""
