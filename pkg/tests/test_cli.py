import json

from typer.testing import CliRunner

from newton_dual.main import app

runner = CliRunner()

OSCILLATOR = json.dumps({"potential": {"terms": [{"coeff": 1, "power": 2}]}})
NOT_REDUCIBLE = json.dumps({"potential": {"terms": [{"coeff": 1, "power": 2}, {"coeff": 1, "power": 3}]}})
HEUN = json.dumps({"kind": "regular", "params": {"alpha": 0.5, "gamma": 2.5}, "z": 1.7})


def test_dualize_inline_json():
    """Test that dualize prints a tagged JSON dual set"""
    result = runner.invoke(app, ["dualize", OSCILLATOR])
    assert result.exit_code == 0
    data = json.loads(result.stdout)
    assert data["schema"] == "newton-dual/v1"
    assert "calculated_at" not in data
    assert len(data["members"]) == 2


def test_dualize_output_is_deterministic():
    """Test that repeated runs print identical bytes"""
    first = runner.invoke(app, ["dualize", OSCILLATOR])
    second = runner.invoke(app, ["dualize", OSCILLATOR])
    assert first.exit_code == second.exit_code == 0
    assert first.stdout == second.stdout


def test_invalid_json_exits_with_input_error():
    """Test that malformed input exits with code 2"""
    result = runner.invoke(app, ["dualize", "{not json"])
    assert result.exit_code == 2


def test_unknown_kind_exits_with_input_error():
    """Test that an unknown potential kind exits with code 2"""
    result = runner.invoke(app, ["dualize", json.dumps({"potential": {"kind": "yukawa"}})])
    assert result.exit_code == 2


def test_missing_file_exits_with_input_error(tmp_path):
    """Test that a missing input file exits with code 2"""
    result = runner.invoke(app, ["dualize", str(tmp_path / "missing.json")])
    assert result.exit_code == 2


def test_input_file_and_out_option(tmp_path):
    """Test reading the input from a file and writing the result to --out"""
    source = tmp_path / "input.json"
    source.write_text(OSCILLATOR)
    target = tmp_path / "dual.json"
    result = runner.invoke(app, ["dualize", str(source), "--out", str(target)])
    assert result.exit_code == 0
    assert result.stdout == ""
    assert json.loads(target.read_text())["schema"] == "newton-dual/v1"


def test_heun_csv_header():
    """Test that complex columns are split into re and im"""
    result = runner.invoke(app, ["heun", HEUN, "--format", "csv"])
    assert result.exit_code == 0
    assert result.stdout.splitlines()[0].startswith("kind,z_re,z_im,value_re,value_im")


def test_partial_result_still_writes_output(tmp_path):
    """Test that a dual set with non-Heun members exits 3 after writing its output"""
    target = tmp_path / "partial.json"
    result = runner.invoke(app, ["dualize", NOT_REDUCIBLE, "--out", str(target)])
    assert result.exit_code == 3
    data = json.loads(target.read_text())
    assert data["warnings"]
    assert data["members"][0]["heun_reducible"] is False


def test_grid_points_bounds():
    """Test that out-of-range grid sizes are rejected by the option parser"""
    result = runner.invoke(app, ["dualize", OSCILLATOR, "--grid-points", "10"])
    assert result.exit_code == 2
