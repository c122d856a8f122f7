EXPERIMENT_DEFAULTS = {
    "transfer-sweep": {
        "params": {
            "instance": "elimination",
            "instance_args": {},
            "beta": 0.004,
            "eps": 0.2,
            "delta": 0.05,
            "threshold_variant": "standard",
            "samples_per_pair": None,
            "scratch": False,
        },
        "acceptance": {
            "min_success_rate": 0.95,
        },
    },
    "hardcase-figures": {
        "params": {
            "betas": {"start": 0.01, "stop": 1.9, "num": 20},
            "gammas": [0.91, 0.95, 0.99],
            "gamma_points": 0,
            "eps_ratio": 0.5,
            "instances": [],
        },
        "acceptance": {
            "max_domain_violations": 0,
            "min_eps0_correlation": 0.99,
        },
    },
    "warmstart": {
        "params": {
            "sailing": {"width": 4, "height": 4, "n_winds": 4, "wind_change_prob": 0.3, "gamma": 0.9},
            "instance_seed": 0,
            "beta": 0.3,
            "eps": 0.5,
            "max_iters": 400,
            "step_h": 50.0,
            "n_points": 20,
        },
        "acceptance": {
            "min_jumpstart_rate": 0.9,
        },
    },
    "hull-sweep": {
        "params": {
            "K": 3,
            "n_states": 6,
            "n_actions": 2,
            "gamma": 0.9,
            "hull_seed": 0,
            "eps": 0.5,
            "delta": 0.05,
            "scale": 1e-4,
            "bound_samples": 16000,
            "sample_sizes": [1000, 4000, 16000],
            "noise_free_points": 0,
            "noise_free_K": [1, 2, 3, 4, 5],
        },
        "acceptance": {
            "ratio_low": 0.35,
            "ratio_high": 0.7,
        },
    },
    "bound-sweep": {
        "params": {
            "n_pairs": 1000,
            "max_states": 10,
            "max_actions": 5,
            "gammas": [0.5, 0.9],
            "betas": [0.05, 0.2],
            "eps": 0.1,
        },
        "acceptance": {
            "min_q_bound_rate": 1.0,
            "min_value_bound_rate": 1.0,
            "min_soundness_rate": 1.0,
        },
    },
}


def get_experiment_defaults(kind: str):
    """Fetch the default params and acceptance thresholds for an experiment kind."""
    return EXPERIMENT_DEFAULTS.get(kind)
