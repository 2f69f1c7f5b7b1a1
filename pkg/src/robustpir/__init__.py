"""Universal robust private information retrieval on MDS-coded storage."""

from .config import SystemConfig
from .dss_sim import FixedSet, LatencyCutoff, RandomSubset, RetrievalSession, run_session
from .finite_field import ExtSymbol, FieldElement, FieldMatrix, gaussian_solve
from .mds_storage import FileStore, MdsCode, StoreDocument, encode_store, erasure_reconstruct, make_code
from .pir_decoder import Transcript, build_system, compute_cpop, decode_file, optimal_cpop
from .privacy_audit import assert_privacy, enumerate_distribution
from .robust_pir import CapacityExceeded, layer1_plan, layer2_plan, session_plan, universal_params

__all__ = [
    "CapacityExceeded", "ExtSymbol", "FieldElement", "FieldMatrix", "FileStore", "FixedSet",
    "LatencyCutoff", "MdsCode", "RandomSubset", "RetrievalSession", "StoreDocument", "SystemConfig",
    "Transcript", "assert_privacy", "build_system", "compute_cpop", "decode_file", "encode_store",
    "enumerate_distribution", "erasure_reconstruct", "gaussian_solve", "layer1_plan", "layer2_plan",
    "make_code", "optimal_cpop", "run_session", "session_plan", "universal_params",
]
__version__ = "0.1.0"
