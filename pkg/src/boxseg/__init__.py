"""Box-supervised binary segmentation with mask-to-box projection and
scale-consistency regularisation."""
from .errors import ConfigError, DimensionError
from .kernels import BACKEND
from .m2b import ProjectionPair, back_project, m2b, m2b_backward, m2b_torch, project

__version__ = "0.1.0"
