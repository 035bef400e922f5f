"""qkit: post-training piecewise linear quantization toolkit.

Quantizer kernels (uniform and breakpoint-split piecewise), an analytic
expected-error model with an optimal-breakpoint solver, decode-side bias
correction, activation-range calibration, an integer inner-product datapath
simulator, and a CLI over the QTNS/QTNQ binary formats.
"""

from .backend import HAVE_COMPILED, backend_name
from .bias import (
    MEAN_AND_VARIANCE,
    MEAN_ONLY,
    BiasCorrection,
    apply_correction,
    measure_bias,
)
from .calibration import CalibrationRange, calibrate, quantize_activations
from .datapath import (
    DatapathConstants,
    DatapathTrace,
    OverheadReport,
    inner_product_pwlq,
    inner_product_uniform,
    make_constants_pwlq,
    make_constants_uniform,
    overhead_report,
    reference_inner_product,
    uniform_reference_trace,
    with_activation_params,
)
from .distributions import (
    GAUSSIAN,
    LAPLACIAN,
    DistributionModel,
    fit,
    sample,
)
from .error_model import (
    ErrorReport,
    bound_ratio,
    error_report,
    expected_pwlq_error,
    expected_pwlq_error_multi,
    expected_pwlq_error_pieces,
    optimal_error_closed_form,
    pwlq_error_derivatives,
    stationarity_residual,
)
from .errors import (
    DataError,
    FormatError,
    QkitError,
    RecipeError,
    SolverError,
)
from .pwlq import (
    MAX_BREAKPOINTS,
    PER_CHANNEL,
    PER_LAYER,
    PwlqParams,
    code_magnitude,
    code_sign,
    dequantize,
    dequantize_pwlq,
    empirical_mse,
    make_pwlq_params,
    quantize_channels,
    quantize_pwlq,
)
from .qformat import load_quantized, save_quantized
from .solver import (
    CLOSED_FORM_GAUSSIAN,
    EMPIRICAL_GRID,
    GRADIENT_DESCENT,
    BreakpointSolution,
    SolverConfig,
    closed_form_gaussian,
    empirical_grid,
    perturb_breakpoints,
    solve_breakpoint,
    solve_multi,
)
from .tensor import (
    Tensor,
    TensorStats,
    channel_views,
    load_tensor,
    save_tensor,
    stats,
)
from .uniform import (
    ASYMMETRIC_UNSIGNED,
    SYMMETRIC_SIGNED,
    QuantParams,
    QuantizedTensor,
    degenerate_params,
    dequantize_uniform,
    error_constant,
    expected_uniform_error,
    make_params,
    quantize_uniform,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
