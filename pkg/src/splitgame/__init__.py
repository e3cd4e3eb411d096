"""Approximate equilibria of atomic splittable polymatroid congestion games
via exact equilibria of packetized (k-integral) games."""

from .cournot import (
    Firm,
    IsomorphismMap,
    Oligopoly,
    OligopolyError,
    PriceFunction,
    firm_utility,
    map_strategy,
    solve_cournot,
    to_congestion_game,
    unmap_strategy,
)
from .game import (
    NEG_INF,
    CostFunction,
    Game,
    GameError,
    Player,
    Profile,
    game_lipschitz,
    is_feasible,
    marginal,
    marginal_down,
    marginal_up,
    player_cost,
)
from .integral import (
    EquilibriumResult,
    InternalInconsistency,
    NonTerminationError,
    PacketSchedule,
    best_response_k,
    local_violation,
    packet_size,
    solve_approx,
    solve_integral,
)
from .polymatroid import (
    ExplicitPolymatroid,
    PolymatroidError,
    SimplexPolymatroid,
    exchange_capacity,
    greedy_linear_min,
    is_in_base,
    rank,
    rho_gcd,
    validate,
)
from .verify import (
    GapCertificate,
    Transshipment,
    continuous_best_response,
    epsilon_gap,
    gradient_decomposition,
    transshipment,
)

__version__ = "0.1.0"
