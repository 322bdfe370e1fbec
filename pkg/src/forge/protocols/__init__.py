from .schedule import (
    ProtocolSchedule, PulseEvent, PulseKind, ScatterWindow, SchedulingError, TreeTiming,
)
from .compiler import (
    compile_cluster_nd, compile_linear_cluster, compile_plus_stream, compile_protocol,
    compile_repeater, compile_rhg, compile_star, compile_tree, rhg_open_graph, rhg_open_sites,
)
from .simulate import (
    CollisionError, CollisionReport, Overlap, effective_circuit, expected_state, find_overlaps,
    photon_bins, run_circuit, static_corrections, verify_collisions, verify_protocol, verify_protocol_seeds,
)
