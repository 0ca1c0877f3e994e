"""Post-processing for fair binary classification under predictive parity.

Scores from any probabilistic classifier are turned into group-wise
thresholds whose positive predictive values agree across protected groups
while keeping the cost-sensitive risk as small as possible.  A closed-form
Gaussian model supplies ground truth for validation.
"""

from .calibration import (
    CalibrationConfig,
    CalibrationResult,
    ThresholdSet,
    base_rate_hat,
    calibrate,
    calibrate_scores,
    check_condition,
    match_threshold,
    ppv_hat,
    predict,
)
from .data import CSVSchema, GroupView, SplitSpec, TabularDataset, group_views, load_csv, split
from .gaussian_oracle import GaussianModelSpec, OracleFairSolution, solve_fair_optimal
from .metrics import EvalReport, evaluate, paired_t_one_sided
from .score_model import ScoreModel, TrainConfig, predict_eta, train

__version__ = "0.1.0"
