"""dsedge - DiffServ edge router QoS simulator."""

__version__ = "1.0.0"
