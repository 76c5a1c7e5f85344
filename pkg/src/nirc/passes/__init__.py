from nirc.passes.constraints import (
    BUILTIN_PROFILES,
    CompatReport,
    PlatformProfile,
    Violation,
    check_constraints,
    load_profile,
    neuron_count,
)
from nirc.passes.lowering import lif_to_cuba, translate_for_profile
from nirc.passes.quantize import dequantize, quantize, quantize_tensor
from nirc.passes.rewrite import RULES, RewriteRule, decompose, recompose, simplify_affine
