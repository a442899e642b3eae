"""
Single-receiver GPS odometry from time-differenced carrier phase.

The package is free of Django models and views; the management commands and
the results service in ``odometry`` call into it.
"""
