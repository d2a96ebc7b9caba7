"""No-reference quality assessment for stereoscopic video.

Joint motion/disparity subband statistics (bivariate generalized Gaussian
fits over a steerable pyramid) and a spatial naturalness score form a
37-dimensional frame descriptor that an epsilon-SVR maps to quality.
"""

__version__ = "0.1.0"
