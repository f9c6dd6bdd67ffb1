"""Branch structure, Hilbert-bimodule bases and KMS eigenmeasures for self-similar sets."""

import os as _os

# KMSF_THREADS caps the BLAS/OpenMP pools; it must be set before numpy loads them.
if _os.environ.get("KMSF_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _os.environ["KMSF_THREADS"])

from .basis import (PatchedBasis, RampFamily, build_n_branch_basis, build_patched_basis, ramp,  # noqa: E402
                    roots_of_unity_sum, verify_reconstruction, verify_sum_identity)
from .bimodule import BimoduleElement, inner_product, left_act, norm2, right_act, tilde  # noqa: E402
from .branching import BranchReport, branch_index, branch_values, check_orbit_lemmas, inverse_images, orbit  # noqa: E402
from .errors import *  # noqa: E402,F401,F403
from .ifs_core import (ContractionMap, IfsSystem, attractor_approx, check_open_set_condition,  # noqa: E402
                       check_self_similar, contraction_ratios, load_ifs)
from .kms import (check_condition3, check_condition4, classify, decompose, min_beta,  # noqa: E402
                  standard_family)
from .measures import (KmsCandidate, Mixture, OrbitMeasure, chaos_game, hutchinson_iterate,  # noqa: E402
                       orbit_measure, w1_distance)
from .presets import get_preset  # noqa: E402

__version__ = "0.1.0"
