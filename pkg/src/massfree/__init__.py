"""Mass-matrix-free continuous finite elements for linear transport."""
from .dec import DecScheme, compute_dt, dec_scheme, dec_step
from .mesh import Disk, Interval, Mesh, Rectangle, generate_mesh, quadrature_rule
from .residual import Constant, Periodic, Rotation, Scheme, SpatialOperator, WeakInflow
from .space import ElementKind, build_space, eval_field, init_field

__version__ = "0.1.0"
