"""jpegtune: gradient-based optimization of JPEG quantization tables.

A differentiable JPEG proxy with exact reverse-mode table gradients, a
learned bit-rate estimator, and a bit-accurate baseline codec used as the
measurement oracle.
"""

__version__ = "0.1.0"
