"""One greedy routing algorithm, four DHTs: Chord, Pastry, Tapestry and Kademlia
as parameter choices of a single digit-wise distance metric."""
from .identifiers import (
    Identifier,
    MetricParams,
    ParseError,
    Variant,
    chord_distance,
    distance,
    generalized_distance,
    hash_key,
    parse_id,
    root_of_oracle,
    symmetric_distance,
)
from .lookup import (
    ConvergenceReport,
    HopDecision,
    LookupTrace,
    RoutingFailure,
    lookup,
    next_hop_chord,
    next_hop_generic,
    next_hop_pastry,
    verify_convergence,
)
from .overlay import Overlay, OverlayError, audit_placement, create_overlay, get, join, leave, put
from .tables import (
    Algorithm,
    ChordState,
    KademliaTable,
    PastryState,
    TableBudget,
    TapestryTable,
    build_chord_state,
    build_kademlia_table,
    build_pastry_state,
    build_state,
    build_tapestry_table,
    params_for,
    truncate_rows,
    validate_table,
)

__version__ = "0.1.0"
