import pytest

from nfdp.config import ConfigError, SimulationConfig, effective_text, parse_config_text
from nfdp.datagen import LabelSpace, PartitionMode
from nfdp.federation import PrivacyMode


class TestParsing:
    def test_empty_config_is_all_defaults(self):
        assert parse_config_text("") == parse_config_text("# just a comment\n\n")

    def test_comments_and_whitespace(self):
        cfg = parse_config_text("parties = 3  # three of them\n\n# full-line comment\nrounds=2\n")
        assert cfg.parties == 3
        assert cfg.rounds == 2

    def test_unknown_key_names_line(self):
        with pytest.raises(ConfigError) as err:
            parse_config_text("parties=3\npartyes=4\n")
        assert "line 2" in str(err.value)
        assert "partyes" in str(err.value)

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError) as err:
            parse_config_text("parties=3\nparties=4\n")
        assert "duplicate" in str(err.value)

    def test_bad_value_names_key_and_line(self):
        with pytest.raises(ConfigError) as err:
            parse_config_text("rounds=twenty\n")
        assert "line 1" in str(err.value) and "rounds" in str(err.value)

    def test_missing_equals(self):
        with pytest.raises(ConfigError):
            parse_config_text("parties 3\n")

    def test_enum_choice_validation(self):
        with pytest.raises(ConfigError) as err:
            parse_config_text("mode=argmin\n")
        assert "argmin" in str(err.value)

    def test_layer_dims_list(self):
        cfg = parse_config_text("layer_dims=32,16\n")
        assert cfg.layer_dims == (32, 16)
        with pytest.raises(ConfigError):
            parse_config_text("layer_dims=32,zero\n")

    def test_bools(self):
        assert parse_config_text("charts=true\n").charts is True
        with pytest.raises(ConfigError):
            parse_config_text("charts=yes\n")


class TestValidation:
    def test_ldp_needs_sigma_or_target(self):
        with pytest.raises(ConfigError):
            parse_config_text("privacy=ldp\n")
        cfg = parse_config_text("privacy=ldp\nldp_sigma=10\nmode=logits\n")
        assert cfg.ldp_sigma == 10.0

    def test_ldp_sigma_and_target_exclusive(self):
        with pytest.raises(ConfigError):
            parse_config_text("privacy=ldp\nldp_sigma=1\nldp_epsilon=1\nldp_delta=0.1\n")

    def test_ldp_keys_require_ldp_privacy(self):
        with pytest.raises(ConfigError):
            parse_config_text("ldp_sigma=5\n")

    def test_ldp_rejects_argmax(self):
        with pytest.raises(ConfigError):
            parse_config_text("privacy=ldp\nldp_sigma=1\nmode=argmax\n")

    def test_subclass_partition_party_cap(self):
        with pytest.raises(ConfigError):
            parse_config_text("partition=subclass\nparties=4\ntask_subclasses=3\n")

    def test_subclass_partition_forces_superclass_labels(self):
        cfg = parse_config_text("partition=subclass\nparties=3\n")
        assert cfg.task_labels == "superclass"
        with pytest.raises(ConfigError):
            parse_config_text("partition=subclass\nparties=3\ntask_labels=subclass\n")

    def test_without_replacement_k_bound(self):
        with pytest.raises(ConfigError):
            parse_config_text("sampling=without\nk=400\nper_party_n=300\n")

    def test_full_data_modes_force_k(self):
        cfg = parse_config_text("privacy=none\nk=60\nper_party_n=200\n")
        assert cfg.k == 200
        cfg = parse_config_text("privacy=ldp\nldp_sigma=1\nmode=logits\nk=7\nper_party_n=50\n")
        assert cfg.k == 50

    def test_public_size_within_pool(self):
        with pytest.raises(ConfigError):
            parse_config_text("public_size=500\npublic_pool=100\n")

    def test_auto_labels_resolution(self):
        assert parse_config_text("partition=iid\n").task_labels == "subclass"
        assert parse_config_text("partition=shift\n").task_labels == "subclass"


class TestDerivedObjects:
    def test_task_and_plan(self):
        cfg = parse_config_text("partition=subclass\nparties=3\ntask_superclasses=2\ntask_subclasses=3\n")
        task = cfg.task()
        assert task.label_space is LabelSpace.SUPERCLASS
        assert task.emitted_classes == 2
        plan = cfg.plan()
        assert plan.mode is PartitionMode.NON_IID_SUBCLASS

    def test_federation_config(self):
        cfg = parse_config_text("privacy=none\nthreads=2\n")
        fed = cfg.federation_config()
        assert fed.privacy is PrivacyMode.NON_PRIVATE
        assert fed.threads == 2
        assert fed.k == cfg.per_party_n


class TestEffectiveText:
    def test_round_trip_is_fixed_point(self):
        cfg = parse_config_text("parties=3\nrounds=2\nprivacy=ldp\nldp_sigma=4.5\nmode=logits\n")
        text = effective_text(cfg)
        again = parse_config_text(text)
        assert again == cfg
        assert effective_text(again) == text

    def test_defaults_serialization_idempotent(self):
        first = effective_text(parse_config_text(""))
        second = effective_text(parse_config_text(first))
        assert first == second
        assert "task_labels=subclass" in first  # auto resolved away

    def test_optional_keys_omitted_when_unset(self):
        text = effective_text(parse_config_text(""))
        assert "ldp_sigma" not in text
        assert "ldp_epsilon" not in text
