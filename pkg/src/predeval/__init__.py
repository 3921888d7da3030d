"""Cost-based planning and execution of AND/OR predicate trees over columnar data."""

from .costmodel import CostModel
from .engine import BitmapEvaluator, Bitmap, Table, load_csv, with_measured_stats
from .expr import PredicateTree, normalize, parse, parse_tree, tree_from_spec
from .orderp import no_or_opt, order_p
from .planner import Plan, PlannerState, deepfish, run_ordering, shallowfish, shallowfish_opt
from .vertexsem import FractionEvaluator, VertexEvaluator

__version__ = "0.1.0"
