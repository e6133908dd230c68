"""Simulated-user evaluation of conversational recommenders."""

from .dataset import (
    Item,
    ItemCatalog,
    Rating,
    RatingTable,
    SimulatedUser,
    load_items,
    load_ratings,
    split_user_history,
    split_users,
)
from .errors import ConvosimError, ParseError, PoolExhausted, ValidationError
from .experiment import ExperimentConfig, run_experiment, run_simulation
from .metrics import MetricsReport, UserMetrics, aggregate, compute_ap_at_k, score_transcript
from .profile import (
    FeaturePartition,
    UserProfile,
    build_user_profile,
    classify_features,
    update_profile_features,
    update_profile_items,
)
from .recommender import (
    ContentBasedRecommender,
    Explanation,
    RandomRecommender,
    RecList,
    Recommender,
    elicit_feature,
    explain,
)
from .render import render_transcript
from .simulator import (
    DialogueConfig,
    DialogueEvent,
    State,
    StateWeights,
    Transcript,
    answer_elicitation,
    choose_next_state,
    correct_assumption,
    post_reject_branch,
    provide_preference,
    react_to_recommendations,
    run_dialogue,
)

__version__ = "0.1.0"
