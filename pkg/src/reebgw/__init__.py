"""Gromov-Wasserstein comparison of Reeb graphs."""

from .graph import (GraphError, GraphFormatError, PointCloud, ScalarGraph, ValidationReport,
                    load_graph, load_point_cloud, read_graph, save_graph, synth_shapes, validate,
                    write_graph)
from .gw import Coupling, GWResult, SolverOpts, gw_objective, plan_heatmap_export, solve_rgw
from .metrics import (DistanceMatrix, MetricKind, distance_matrix, max_sym_reeb_radius,
                      reeb_distance, reeb_radius, shortest_path, sym_reeb_radius)
from .persistence import (DiagramPoint, ExtendedDiagram, bottleneck_distance,
                          extended_persistence, wasserstein1_distance)
from .pimage import (MeasureError, NodeMeasure, PersistenceImage, PIParams, baseline_measure,
                     birth_persistence, build_pi, pi_measure, total_variation)

__version__ = "0.1.0"
