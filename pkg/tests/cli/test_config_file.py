import pytest
from click.testing import CliRunner

from riscv_supplychain import cli, config


@pytest.fixture()
def conf_path(tmp_path):
    conf_path = tmp_path / "custom" / config.CONFIG_FILENAME
    config.write_default_config(conf_path)
    return conf_path


def test_config_creation(conf_path):
    conf = config.read_config(conf_path)
    for sectname, sectcont in conf.items():
        for k, val in sectcont.items():
            assert val == str(config.TEMPLATE_CONF_DICT[sectname][k])


def test_config_path_follows_environment(config_dir):
    assert config.get_config_path() == config_dir / config.CONFIG_FILENAME
    assert not config.get_config_path().exists()
    config.read_config()
    assert config.get_config_path().exists()


def test_write_config_value(conf_path):
    url = "http://localhost:8000/v1"
    config.write_config_value("base_url", url, conf_path)
    conf = config.read_config(conf_path)
    assert conf["endpoint"]["base_url"] == "http://localhost:8000/v1"
    with pytest.raises(KeyError):
        config.write_config_value("colour", "blue", conf_path)


def test_endpoint_config_precedence(conf_path, monkeypatch):
    with pytest.raises(ValueError, match=config.BASE_URL_ENV):
        config.get_endpoint_config(conf_path)

    config.write_config_value("base_url", "http://file/v1", conf_path)
    config.write_config_value("model_name", "file-model", conf_path)
    endpoint = config.get_endpoint_config(conf_path)
    assert endpoint.base_url == "http://file/v1"
    assert endpoint.model_name == "file-model"
    assert endpoint.api_key == ""
    assert endpoint.max_retries == 3

    monkeypatch.setenv(config.BASE_URL_ENV, "http://env/v1")
    monkeypatch.setenv(config.API_KEY_ENV, "sk-env")
    endpoint = config.get_endpoint_config(conf_path, max_retries=1)
    assert endpoint.base_url == "http://env/v1"
    assert endpoint.model_name == "file-model"
    assert endpoint.api_key == "sk-env"
    assert endpoint.max_retries == 1


def test_transcript_dir(conf_path, tmp_path):
    config.write_config_value("transcript_dir", str(tmp_path), conf_path)
    assert config.get_transcript_dir(conf_path) == tmp_path


def test_config_show():
    runner = CliRunner()
    result = runner.invoke(cli.cli, ["config", "--show"])
    assert result.exit_code == 0
    assert result.stdout == config._print_config() + "\n"
    assert "[endpoint]" in result.stdout


def test_config_edit(tmp_path):
    runner = CliRunner()
    result = runner.invoke(
        cli.cli, ["config", "-k", "base_url", "-v", "http://localhost/v1"]
    )
    assert result.exit_code == 0
    assert config.read_config()["endpoint"]["base_url"] == (
        "http://localhost/v1"
    )

    new_dir = tmp_path / "transcripts"
    result = runner.invoke(
        cli.cli, ["config", "-k", "transcript_dir", "-v", str(new_dir)]
    )
    assert result.exit_code == 0
    assert config.get_transcript_dir() == new_dir


def test_config_rejects_bad_dir(tmp_path):
    runner = CliRunner()
    bad = tmp_path / "missing" / "transcripts"
    result = runner.invoke(
        cli.cli, ["config", "-k", "transcript_dir", "-v", str(bad)]
    )
    assert result.exit_code == 0
    assert "is not a valid path" in result.stdout
    assert config.get_transcript_dir() != bad


def test_config_never_stores_api_key():
    config.read_config()
    runner = CliRunner()
    result = runner.invoke(cli.cli, ["config", "-k", "api_key", "-v", "sk-x"])
    assert result.exit_code == 0
    assert config.API_KEY_ENV in result.stdout
    assert "sk-x" not in config.get_config_path().read_text()


def test_config_unknown_key():
    runner = CliRunner()
    result = runner.invoke(cli.cli, ["config", "-k", "colour", "-v", "x"])
    assert result.exit_code == 2
    assert result.stderr == (
        "error[usage]: Unknown configuration key colour\n"
    )


def test_config_needs_an_action():
    runner = CliRunner()
    result = runner.invoke(cli.cli, ["config", "-k", "base_url"])
    assert result.exit_code == 2
