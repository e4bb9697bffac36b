"""2D high-order mixed finite element toolkit for VEF-accelerated transport."""

__version__ = "0.1.0"
