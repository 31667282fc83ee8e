"""Graph-level anomaly detection by distilling a frozen random GCN into a
trainable one, at both graph and node granularity."""

__version__ = "0.1.0"

from .data import GraphDataset, SynthSpec, parse_benchmark_dir, read_snapshot, synth_corpus, write_snapshot
from .evaluation import ExperimentGrid, auc, run_cv, run_grid
from .gcn import GcnArch, GcnParams, gcn_backward, gcn_forward, init_params
from .graph import Graph, build_graph, degree_features, normalized_adjacency
from .model import DistillModel, TrainConfig, score, score_many, train

__all__ = [
    "DistillModel", "ExperimentGrid", "GcnArch", "GcnParams", "Graph", "GraphDataset", "SynthSpec",
    "TrainConfig", "auc", "build_graph", "degree_features", "gcn_backward", "gcn_forward",
    "init_params", "normalized_adjacency", "parse_benchmark_dir", "read_snapshot", "run_cv",
    "run_grid", "score", "score_many", "synth_corpus", "train", "write_snapshot",
]
