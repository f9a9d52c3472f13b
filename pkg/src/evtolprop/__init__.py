"""Safety assessment and sizing toolkit for battery-electric multirotor propulsion architectures."""

__version__ = "0.1.0"
