"""
Run configuration: a JSON object validated against `TRAIN_CONFIG_SCHEMA` and turned into a
`TrainConfig`.
"""
import dataclasses
import json
import logging
import os
from dataclasses import dataclass
from typing import List, Optional

from TrustQN.attribute import ConfigAttribute
from TrustQN.exceptions import ConfigInvalidError, ConfigValueError
from TrustQN.schema import ConfigSchema
from TrustQN.subproblem import FACTORIZATIONS, TrustRegionState

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "TRUSTQN_OUTPUT_DIR"

DETERMINISTIC_METHODS = ("lbfgs-tr", "lsr1-tr")
STOCHASTIC_METHODS = ("slbfgs-tr", "slsr1-tr")
METHODS = DETERMINISTIC_METHODS + STOCHASTIC_METHODS + ("adam",)
OBJECTIVES = ("quadratic", "rosenbrock", "mlp")

BFGS_TAU = 1e-2
SR1_TAU = 1e-8


def _positive(value):
    return value > 0


def _non_negative(value):
    return value >= 0


def _unit_open(value):
    return 0 < value < 1


TRAIN_CONFIG_SCHEMA = ConfigSchema().add_attributes([
    ConfigAttribute("method", "str", attribute_required=True,
                    attribute_validator=lambda value: value in METHODS,
                    attribute_description="one of " + ", ".join(METHODS)),
    ConfigAttribute("objective", "str", "quadratic",
                    attribute_validator=lambda value: value in OBJECTIVES),
    ConfigAttribute("dimension", "int", 20, attribute_validator=lambda value: value >= 2),
    ConfigAttribute("condition", "float", 1e3, attribute_validator=lambda value: value >= 1),
    ConfigAttribute("hidden_layers", "list", [32],
                    attribute_validator=lambda value: all(
                        isinstance(width, int) and not isinstance(width, bool) and width > 0
                        for width in value)),
    ConfigAttribute("train_images", "str", attribute_nullable=True),
    ConfigAttribute("train_labels", "str", attribute_nullable=True),
    ConfigAttribute("test_images", "str", attribute_nullable=True),
    ConfigAttribute("test_labels", "str", attribute_nullable=True),
    ConfigAttribute("limit", "int", attribute_nullable=True, attribute_validator=_positive),
    ConfigAttribute("test_limit", "int", attribute_nullable=True, attribute_validator=_positive),
    ConfigAttribute("output_dir", "str", "runs"),
    ConfigAttribute("display_every", "int", 1, attribute_validator=_positive),
    ConfigAttribute("grad_stop", "bool", True),
    ConfigAttribute("factorization", "str", "qr",
                    attribute_validator=lambda value: value in FACTORIZATIONS),
    ConfigAttribute("memory", "int", 20, attribute_validator=_positive),
    ConfigAttribute("overlap", "int", 50, attribute_validator=_positive),
    ConfigAttribute("epoch_max", "int", 10, attribute_validator=_positive),
    ConfigAttribute("max_iterations", "int", attribute_nullable=True, attribute_validator=_positive),
    ConfigAttribute("grad_tol", "float", 1e-5, attribute_validator=_non_negative),
    ConfigAttribute("delta0", "float", 1.0, attribute_validator=_positive),
    ConfigAttribute("gamma0", "float", 1.0, attribute_validator=lambda value: value != 0),
    ConfigAttribute("tau", "float", attribute_nullable=True, attribute_validator=_positive),
    ConfigAttribute("tau1", "float", 1e-4, attribute_validator=_unit_open),
    ConfigAttribute("tau2", "float", 0.1),
    ConfigAttribute("tau3", "float", 0.75),
    ConfigAttribute("eta2", "float", 0.5),
    ConfigAttribute("eta3", "float", 0.8),
    ConfigAttribute("eta4", "float", 2.0),
    ConfigAttribute("seed", "int", 0, attribute_validator=_non_negative),
    ConfigAttribute("adam_lr", "float", 1e-3, attribute_validator=_positive),
    ConfigAttribute("adam_beta1", "float", 0.9,
                    attribute_validator=lambda value: 0 <= value < 1),
    ConfigAttribute("adam_beta2", "float", 0.999,
                    attribute_validator=lambda value: 0 <= value < 1),
    ConfigAttribute("adam_eps", "float", 1e-8, attribute_validator=_positive),
])


@dataclass(frozen=True)
class TrainConfig:
    method: str
    objective: str = "quadratic"
    dimension: int = 20
    condition: float = 1e3
    hidden_layers: List[int] = dataclasses.field(default_factory=lambda: [32])
    train_images: Optional[str] = None
    train_labels: Optional[str] = None
    test_images: Optional[str] = None
    test_labels: Optional[str] = None
    limit: Optional[int] = None
    test_limit: Optional[int] = None
    output_dir: str = "runs"
    display_every: int = 1
    grad_stop: bool = True
    factorization: str = "qr"
    memory: int = 20
    overlap: int = 50
    epoch_max: int = 10
    max_iterations: Optional[int] = None
    grad_tol: float = 1e-5
    delta0: float = 1.0
    gamma0: float = 1.0
    tau: Optional[float] = None
    tau1: float = 1e-4
    tau2: float = 0.1
    tau3: float = 0.75
    eta2: float = 0.5
    eta3: float = 0.8
    eta4: float = 2.0
    seed: int = 0
    adam_lr: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    @classmethod
    def from_dict(cls, data, environ=None):
        """
        The function `from_dict` validates a configuration document and builds the typed config.

        :param data: The `data` parameter is the decoded JSON object
        :param environ: The `environ` parameter is the environment consulted for the output directory
        override, defaults to `os.environ` (optional)
        :return: a `TrainConfig`. Raises `ConfigInvalidError` subclasses describing every problem found.
        """
        if not isinstance(data, dict):
            TRAIN_CONFIG_SCHEMA.validate(data)
        item = TRAIN_CONFIG_SCHEMA.fill_defaults(dict(data))
        TRAIN_CONFIG_SCHEMA.validate(item)
        environ = os.environ if environ is None else environ
        if environ.get(OUTPUT_DIR_ENV):
            logger.debug("Output directory overridden by %s", OUTPUT_DIR_ENV)
            item["output_dir"] = environ[OUTPUT_DIR_ENV]
        item["hidden_layers"] = list(item["hidden_layers"])
        config = cls(**item)
        config._verify_consistency()
        return config

    def _verify_consistency(self):
        errors = []
        if self.objective == "mlp" and not (self.train_images and self.train_labels):
            errors.append("objective 'mlp' needs train_images and train_labels")
        if bool(self.test_images) != bool(self.test_labels):
            errors.append("test_images and test_labels must be given together")
        if self.method in ("lbfgs-tr", "slbfgs-tr") and self.gamma0 <= 0:
            errors.append("BFGS methods need a positive gamma0")
        if errors:
            raise ConfigValueError('\n'.join(errors))
        self.trust_region_state()

    @property
    def is_stochastic(self):
        return self.method in STOCHASTIC_METHODS

    @property
    def uses_sr1(self):
        return self.method in ("lsr1-tr", "slsr1-tr")

    def resolved_tau(self):
        """Pair acceptance threshold, defaulting per update kind."""
        if self.tau is not None:
            return self.tau
        return SR1_TAU if self.uses_sr1 else BFGS_TAU

    def trust_region_state(self):
        return TrustRegionState(delta=self.delta0, tau1=self.tau1, tau2=self.tau2, tau3=self.tau3,
                                eta2=self.eta2, eta3=self.eta3, eta4=self.eta4)

    def get_self_json(self):
        return dataclasses.asdict(self)


def load_config(path, environ=None):
    """
    The function `load_config` reads a JSON configuration file.

    :param path: The `path` parameter is the configuration file location
    :return: a validated `TrainConfig`.
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except OSError as e:
        raise ConfigInvalidError(f"Cannot read configuration '{path}': {e}")
    except json.JSONDecodeError as e:
        raise ConfigInvalidError(f"Configuration '{path}' is not valid JSON: {e}")
    return TrainConfig.from_dict(data, environ)
