import json

import pytest

from TrustQN.attribute import ConfigAttribute
from TrustQN.config import (BFGS_TAU, OUTPUT_DIR_ENV, SR1_TAU, TRAIN_CONFIG_SCHEMA, TrainConfig,
                            load_config)
from TrustQN.exceptions import ConfigInvalidError, ConfigTypeError, ConfigValueError
from TrustQN.schema import ConfigSchema


def test_minimal_config_takes_defaults():
    cfg = TrainConfig.from_dict({"method": "adam"}, environ={})
    assert cfg.objective == "quadratic"
    assert cfg.memory == 20 and cfg.overlap == 50 and cfg.epoch_max == 10
    assert cfg.hidden_layers == [32]
    assert cfg.max_iterations is None and cfg.tau is None
    assert cfg.output_dir == "runs"
    assert not cfg.is_stochastic


def test_method_flags():
    assert TrainConfig.from_dict({"method": "slsr1-tr"}, environ={}).is_stochastic
    assert TrainConfig.from_dict({"method": "lsr1-tr"}, environ={}).uses_sr1
    assert not TrainConfig.from_dict({"method": "slbfgs-tr"}, environ={}).uses_sr1


def test_resolved_tau():
    assert TrainConfig.from_dict({"method": "lbfgs-tr"}, environ={}).resolved_tau() == BFGS_TAU
    assert TrainConfig.from_dict({"method": "lsr1-tr"}, environ={}).resolved_tau() == SR1_TAU
    assert TrainConfig.from_dict({"method": "lsr1-tr", "tau": 1e-3}, environ={}).resolved_tau() == 1e-3


def test_all_problems_reported_together():
    with pytest.raises(ConfigValueError) as info:
        TrainConfig.from_dict({"memmory": 5, "overlap": -1}, environ={})
    message = str(info.value)
    assert "Missing required attributes: method" in message
    assert "Unknown attributes: memmory" in message
    assert "overlap=-1" in message


def test_type_mismatch_only_is_type_error():
    with pytest.raises(ConfigTypeError):
        TrainConfig.from_dict({"method": "adam", "memory": "20"}, environ={})
    with pytest.raises(ConfigTypeError):
        TrainConfig.from_dict({"method": "adam", "memory": True}, environ={})


def test_int_accepted_where_float_expected():
    assert TrainConfig.from_dict({"method": "adam", "delta0": 2}, environ={}).delta0 == 2


def test_unknown_method():
    with pytest.raises(ConfigValueError):
        TrainConfig.from_dict({"method": "sgd"}, environ={})


def test_document_must_be_an_object():
    with pytest.raises(ConfigTypeError):
        TrainConfig.from_dict(["method", "adam"], environ={})


def test_consistency_rules():
    with pytest.raises(ConfigValueError, match="train_images"):
        TrainConfig.from_dict({"method": "adam", "objective": "mlp"}, environ={})
    with pytest.raises(ConfigValueError, match="together"):
        TrainConfig.from_dict({"method": "adam", "test_images": "x"}, environ={})
    with pytest.raises(ConfigValueError, match="gamma0"):
        TrainConfig.from_dict({"method": "lbfgs-tr", "gamma0": -1.0}, environ={})
    with pytest.raises(ConfigValueError):
        TrainConfig.from_dict({"method": "lbfgs-tr", "tau2": 0.8}, environ={})
    assert TrainConfig.from_dict({"method": "lsr1-tr", "gamma0": -1.0}, environ={}).gamma0 == -1.0


def test_output_dir_from_environment():
    cfg = TrainConfig.from_dict({"method": "adam", "output_dir": "here"}, environ={OUTPUT_DIR_ENV: "/tmp/x"})
    assert cfg.output_dir == "/tmp/x"
    assert TrainConfig.from_dict({"method": "adam", "output_dir": "here"}, environ={}).output_dir == "here"


def test_trust_region_state_from_config():
    state = TrainConfig.from_dict({"method": "lsr1-tr", "delta0": 3.0, "eta4": 4.0}, environ={}).trust_region_state()
    assert state.delta == 3.0 and state.eta4 == 4.0


def test_json_snapshot_round_trips():
    cfg = TrainConfig.from_dict({"method": "slbfgs-tr", "hidden_layers": [16, 8]}, environ={})
    assert TrainConfig.from_dict(json.loads(json.dumps(cfg.get_self_json())), environ={}) == cfg


def test_load_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"method": "lbfgs-tr", "memory": 5}))
    assert load_config(str(path), environ={}).memory == 5

    path.write_text("{not json")
    with pytest.raises(ConfigInvalidError):
        load_config(str(path), environ={})
    with pytest.raises(ConfigInvalidError):
        load_config(str(tmp_path / "missing.json"), environ={})


def test_attribute_declarations():
    with pytest.raises(ConfigTypeError):
        ConfigAttribute("x", "uuid")
    with pytest.raises(ConfigValueError):
        ConfigAttribute("x", "int", "five")
    attribute = ConfigAttribute("x", "list")
    first = attribute.get_attribute_default()
    first.append(1)
    assert attribute.get_attribute_default() == []
    assert ConfigAttribute("x", "int", attribute_nullable=True).get_attribute_default() is None


def test_attribute_check_value():
    attribute = ConfigAttribute("rate", "float", 0.1, attribute_validator=lambda value: value > 0)
    assert attribute.check_value(0.5) is None
    assert attribute.check_value(1) is None
    assert attribute.check_value(True) == "type"
    assert attribute.check_value(None) == "type"
    assert attribute.check_value(-1.0) == "validation"


def test_schema_rejects_duplicates_and_foreign_objects():
    with pytest.raises(ConfigValueError):
        ConfigSchema().add_attributes([ConfigAttribute("a", "int"), ConfigAttribute("a", "str")])
    with pytest.raises(ConfigTypeError):
        ConfigSchema().add_attributes(["a"])


def test_schema_allow_unknown():
    schema = ConfigSchema(allow_unknown=True).add_attributes([ConfigAttribute("a", "int", 1)])
    assert schema.validate({"a": 2, "b": "anything"})
    assert schema.fill_defaults({}) == {"a": 1}


def test_schema_description():
    info = {entry["name"]: entry for entry in TRAIN_CONFIG_SCHEMA.get_schema()}
    assert info["method"]["required"]
    assert info["memory"]["default"] == 20
    assert set(TRAIN_CONFIG_SCHEMA.get_attribute_map()) == set(info)
