"""Heavy-ball neural ODEs: momentum-augmented continuous-depth models with
adjoint gradients, solver-cost accounting, and the experiment drivers built
on them."""

from .adjoint import AdjointResult, backward_pass, grad_extent
from .data import (IrregularSeries, LabeledPointSet, SinusoidForcing,
                   gen_oscillator_series, load_csv_series,
                   sample_point_cloud, split_series, window_series,
                   windowed_splits)
from .models import (FAMILIES, ModelSpec, OdeState, hbode_race_rhs,
                     heavy_ball_discrete, initial_state, linear_f_net,
                     make_rhs)
from .nn import (Activation, Mlp, flatten_params, make_rng, mlp_forward,
                 mlp_init, mlp_vjp, set_flat_params, split_rngs)
from .odeint import (BlowUpError, SolveResult, SolverConfig, StepLimitError,
                     integrate)
from .spectrum import (BlockMatrixM, adjoint_norm_trace, build_M,
                       eigenvalues, expm, pair_by_sum, verify_pairing)
from .training import (AdamState, ClassifierSpec, OdeRnnSpec, TrainConfig,
                       TrainResult, adam_step, classifier_nfe_profile,
                       evaluate_classifier, evaluate_ode_rnn, oscillator_rnn,
                       point_cloud_classifier, train_classifier,
                       train_ode_rnn, windows_from_series)

__all__ = [
    "Activation", "AdamState", "AdjointResult", "BlockMatrixM",
    "BlowUpError", "ClassifierSpec", "FAMILIES", "IrregularSeries",
    "LabeledPointSet", "Mlp", "ModelSpec", "OdeRnnSpec", "OdeState",
    "SinusoidForcing", "SolveResult", "SolverConfig", "StepLimitError",
    "TrainConfig", "TrainResult", "adam_step", "adjoint_norm_trace",
    "backward_pass", "build_M", "classifier_nfe_profile", "eigenvalues",
    "evaluate_classifier", "evaluate_ode_rnn", "expm", "flatten_params",
    "gen_oscillator_series", "grad_extent", "hbode_race_rhs",
    "heavy_ball_discrete", "initial_state", "integrate", "linear_f_net",
    "load_csv_series", "make_rhs", "make_rng", "mlp_forward", "mlp_init",
    "mlp_vjp", "oscillator_rnn", "pair_by_sum", "point_cloud_classifier",
    "sample_point_cloud", "set_flat_params", "split_rngs", "split_series",
    "train_classifier", "train_ode_rnn", "verify_pairing", "window_series",
    "windowed_splits", "windows_from_series",
]
