"""Diagnostics: capacitary testing, quasiadditivity, zero extension, maximal operator."""

from .levels import LevelDecomposition, dyadic_level, level_truncation, pair_inequality_violations
from .maximal import (CapLowerReport, MaximalReport, admissible_radii, ball_ratio, cube_means,
                      local_maximal, maximal_boundedness_probe, mean_split, whitney_cap_lower_check)
from .mazya import (HardyReport, MazyaReport, ReplayResult, concentric_family,
                    discrete_hardy_constant, hardy_report, implied_hardy_constant,
                    level_set_compacta, mazya_replay, mazya_test, rayleigh_span, whitney_union,
                    whitney_union_family)
from .probes import cutoff_probes, nearest_cubes, random_cell_probes, smooth_probes
from .quasi import (CapacityCache, QuasiReport, ZeroExtReport, quasiadditivity,
                    slit_whitney_compact, zero_extension_report)
