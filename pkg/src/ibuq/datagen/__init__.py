from .functions import (ID_INTERVALS, OOD_INTERVALS, discontinuous_fn,
                        region_mask, sample_discontinuous)
from .grf import GRFConfig, GRFSampler, grf_sample, rbf_kernel
from .housing import (HousingSplit, default_csv_path, fetch_housing,
                      load_housing_csv, lof_scores, split_housing)
from .pde import (NewtonError, PDEConfig, solve_diffusion_reaction, space_grid,
                  time_grid)
from .pipeline import (OperatorDataset, build_operator_dataset,
                       load_operator_dataset, save_operator_dataset)
from .store import load_dataset, read_csv, save_dataset, write_csv

__all__ = [
    "ID_INTERVALS", "OOD_INTERVALS", "discontinuous_fn", "region_mask",
    "sample_discontinuous", "GRFConfig", "GRFSampler", "grf_sample", "rbf_kernel",
    "HousingSplit", "default_csv_path", "fetch_housing", "load_housing_csv",
    "lof_scores", "split_housing", "NewtonError", "PDEConfig",
    "solve_diffusion_reaction", "space_grid", "time_grid", "OperatorDataset",
    "build_operator_dataset", "load_operator_dataset", "save_operator_dataset",
    "load_dataset", "read_csv", "save_dataset", "write_csv",
]
