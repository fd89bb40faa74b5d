from core.config import ConfigManager


def test_defaults_are_valid(tmp_path):
    config = ConfigManager(str(tmp_path / ".env"))
    assert config.validate_config() == (True, "Configuration is valid")
    assert config.get_int('bootstrap_partitions') == 8
    assert config.get_float('imbalance') == 1.05


def test_save_and_reload(tmp_path):
    path = str(tmp_path / ".env")
    ConfigManager(path).save_config({'bootstrap_partitions': 16, 'check_mode': 'immediate'})

    config = ConfigManager(path)
    assert config.get_int('bootstrap_partitions') == 16
    assert config.get_value('check_mode') == 'immediate'
    assert config.get_value('log_level') == 'INFO'


def test_invalid_settings(tmp_path):
    config = ConfigManager(str(tmp_path / ".env"))
    for key, value in (('bootstrap_partitions', '12'), ('morton_bits', '30'), ('imbalance', '0.9'),
                       ('check_mode', 'lazy'), ('representation_mode', 'columnar'), ('refine_passes', 'x')):
        config.load_default_config()
        config.set_value(key, value)
        valid, message = config.validate_config()
        assert not valid, key
        assert message
