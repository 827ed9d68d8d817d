"""Settings shared by the whsim subcommands."""
from whsim.em_estimator import EmConfig
from whsim.harness import Scenario, awgn_scenario, default_scenario, load_scenario

AWGN_SCENARIO = 'awgn'


def em_config_from_defaults(defaults: dict, **overrides) -> EmConfig:
    """
    EmConfig from the `[EM]` section of the defaults; keyword overrides that
    are None are ignored.
    """
    section = defaults.get('EM', {})
    settings = {
        'max_iters': int(section.get('MAX_ITERS', 200)),
        'eps_hs_scale': float(section.get('EPS_HS_SCALE', 1e-6)),
        'eps_sigma_scale': float(section.get('EPS_SIGMA_SCALE', 1e-8)),
        'symmetrize_cross': bool(section.get('SYMMETRIZE_CROSS', True)),
        'init_phase': section.get('INIT_PHASE', 'eigen'),
    }
    settings.update({key: value for key, value in overrides.items() if value is not None})
    return EmConfig(**settings)


def resolve_scenario(value: str | None) -> Scenario:
    """
    Scenario named by a `--scenario` flag: the bundled scenario when omitted,
    uncorrelated unit-ratio noise for `awgn`, otherwise a scenario file.
    """
    if value is None:
        return default_scenario()
    if value == AWGN_SCENARIO:
        return awgn_scenario()
    return load_scenario(value)
