"""Hybrid-curve AMM simulator with Q-learning fee and leverage tuning."""

from ammtuner.agent import (
    ACTION_SETS,
    BASELINE_PARAMS,
    ActionEffect,
    AgentKind,
    Hyperparams,
    QTable,
    action_stddev,
    apply_action,
    epsilon_at,
    load_qtable,
    save_qtable,
    select_action,
    td_update,
)
from ammtuner.curve import (
    CurveParams,
    InvariantSolution,
    PoolState,
    SwapQuote,
    apply_fee,
    compute_d,
    execute_swap,
    quote_swap,
    reference_cpmm_quote,
    reference_csmm_quote,
    solve_output_reserve,
)
from ammtuner.env import EnvConfig, EnvObservation, SwapMarketEnv, discretize_slippage
from ammtuner.errors import (
    AmmTunerError,
    ConfigError,
    QuoteInfeasibleError,
    SamplingError,
    SolverError,
)
from ammtuner.experiment import (
    EpochMetrics,
    ExperimentConfig,
    RunResult,
    make_config,
    moving_average,
    read_metrics_csv,
    run_behavior_change,
    run_training,
    sweep,
    terminal_reward,
    write_metrics_csv,
)
from ammtuner.market import (
    LOOSE_TOLERANCE,
    NORMAL_TOLERANCE,
    SwapOrder,
    SwapStatus,
    ToleranceSpec,
    User,
    attempt_swap,
    choose_trade_side,
    generate_swaps,
    generate_users,
)
from ammtuner.sampling import sample_truncated_normal

__version__ = "0.1.0"
