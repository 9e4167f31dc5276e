"""Energy-stable gradient descent with a scalar auxiliary variable.

Modules: ``operators`` (the linear operator L and shifted solves),
``objective`` (objective abstraction, noise and mini-batch wrappers),
``problems`` (benchmarks), ``sav`` (SAV-family steppers), ``baselines``
(GD, NAG, ADAM, exact steepest descent) and ``harness`` (configs, runs,
traces, verification and the CLI).
"""

__version__ = "0.1.0"
