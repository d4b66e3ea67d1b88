"""
Helpers operating on the framework classes: config files and ablation grids.
"""
from .cfg_utils import ConfigError, default_config, framework_to_dict, parse_config
from .functional import ABLATION_FIELDS, AXES, AblationCell, get_experiments, run_ablation
