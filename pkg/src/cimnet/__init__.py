"""Joint search over DNN sub-networks and compute-in-memory hardware configs."""

from .cim import (ConfigSpace, CycleReport, HardwareConfig, base_config,
                  sample_config, simulate, simulate_layer, validate_config)
from .dataflow import (Dataflow, DataflowInfeasibleError, compile_dataflow,
                       enumerate_spatial_tiles, enumerate_temporal_tiles)
from .encoding import GenomeCodec
from .predict import (PredictorEval, RidgeModel, evaluate_predictor, fit_ridge,
                      fit_svr_linear, kendall_tau, mape)
from .proxy import ProxyParams, proxy_accuracy
from .search import (ParetoPoint, SearchHistory, SearchMode, SearchSetting,
                     crowding_distance, cycle_reduction_at_iso_accuracy,
                     hypervolume, joint_search, make_setting,
                     non_dominated_sort, nsga2_screen, pareto_front,
                     select_top_n, static_config)
from .workload import (ArchSpace, Family, LayerSpec, SubnetArch, count_macs,
                       count_params, default_space, lower_to_layers,
                       sample_subnet)

__version__ = "0.1.0"
