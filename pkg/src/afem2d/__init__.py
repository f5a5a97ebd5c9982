"""Adaptive finite elements on triangular meshes in two dimensions."""
from .mesh import Mesh, MeshError, affine_data, export_geometry, load_geometry, mesh_from_arrays
from .refinement import Bisection, Strategy
from .quadrature import Barycentric, QuadratureRule, quadrature_of_order
from .functions import Constant, MeshFunction, CompositeFunction, Evaluable
from .elements import FiniteElement, LagrangeH1, LagrangeL2, LowestOrderH1, LowestOrderL2
from .space import FeSpace, FeFunction, Gradient, Hessian, nodal_interpolation
from .prolongation import Prolongation, LoFeProlongation
from .linalg import vector_product, SparseSystem, solve
from .assembly import BilinearForm, LinearForm, assemble

__version__ = "0.1.0"
