"""Preplan-plan-execute reasoning-data toolkit.

Parses tagged reasoning trajectories, scores preplans for spoiler content,
computes the composite reward and GRPO objective values, synthesizes
filtered SFT corpora against LLM endpoints, and evaluates models with
maj@k / pass@k plus preplan-perturbation probes.
"""

from .clients import (
    ClientError,
    Facet,
    GenerationRequest,
    HttpChatClient,
    JudgeVerdict,
    LlmClient,
    ProtocolError,
    RateLimited,
    RetryPolicy,
    ScriptedClient,
    Timeout,
    UnparseableVerdict,
    attribute_error,
    judge_adherence,
    judge_equivalence,
    judge_proximity,
)
from .evaluation import (
    AttributionCounts,
    EvalRecord,
    EvalReport,
    PerturbationMode,
    PerturbationSpec,
    PoolTooSmall,
    aggregate_attribution,
    answers_equivalent,
    evaluate,
    maj_at_k,
    normalize_answer,
    pass_at_k,
    perturb_preplan,
    token_stats,
)
from .grpo import (
    GroupTooSmall,
    GrpoConfig,
    GrpoResult,
    NonFiniteInput,
    RolloutGroup,
    clipped_surrogate,
    group_advantages,
    grpo_objective,
    importance_ratio,
    kl_term,
)
from .rewards import (
    MissingProximity,
    OutOfRangeGrade,
    RewardBreakdown,
    RewardWeights,
    adherence_reward,
    composite_reward,
    outcome_reward,
)
from .spoiler import (
    DropReason,
    FilterDecision,
    SpoilerConfig,
    SpoilerReport,
    filter_decision,
    spoiler_score,
    style_penalty,
)
from .synthesis import (
    DuplicateId,
    GeneratorSuite,
    ProblemRecord,
    StageFailure,
    SynthesisRecord,
    apply_filter,
    build_dataset,
    split_corpus,
    synthesize,
)
from .trajectory import (
    FormatVerdict,
    MalformedTrajectory,
    Trajectory,
    UnbalancedBraces,
    Violation,
    check_format,
    extract_boxed,
    parse_trajectory,
    render_trajectory,
)

__version__ = "0.1.0"
