"""Many-to-one comparisons of location and scale against a control."""

__version__ = "0.1.0"

from .datamodel import DataError, Dataset, builtin_dataset, levene_transform, load_csv  # noqa: E402
from .lepage import lepage_dunnett  # noqa: E402
from .linmod import fit_ols, levene_global_test, vcov_sandwich  # noqa: E402
from .maxt import MaxTResult, dunnett_classical, dunnett_sandwich, dunnett_scale, maxt_test  # noqa: E402
from .mlt import fit_mlt, mlt_dunnett  # noqa: E402
from .mmm import mmm_dunnett, stack_models  # noqa: E402
from .mvdist import QmcConfig, mv_rect_prob  # noqa: E402
from .sim import SimulationScenario, run_scenario, table1_row  # noqa: E402

__all__ = [
    "DataError", "Dataset", "MaxTResult", "QmcConfig", "SimulationScenario", "builtin_dataset",
    "dunnett_classical", "dunnett_sandwich", "dunnett_scale", "fit_mlt", "fit_ols", "lepage_dunnett",
    "levene_global_test", "levene_transform", "load_csv", "maxt_test", "mlt_dunnett", "mmm_dunnett",
    "mv_rect_prob", "run_scenario", "stack_models", "table1_row", "vcov_sandwich",
]
