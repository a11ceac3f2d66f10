import textwrap

import pytest

from aluthgelab.config import ConfigError, parse_config, parse_config_text

MINIMAL_ITERATE = """\
[experiment]
kind = aluthge-iterate
seed = 7

[operator]
source = random
size = 6
"""


def cfg_text(body):
    return textwrap.dedent(body)


def test_minimal_iterate_config_with_defaults():
    cfg = parse_config_text(MINIMAL_ITERATE)
    assert cfg.kind == "aluthge-iterate"
    assert cfg.name == "experiment"
    assert cfg.seed == 7
    assert cfg.size == 6
    assert cfg.distribution == "ginibre"
    assert cfg.max_steps == 100
    assert cfg.tol == 1e-10
    assert cfg.outputs == {
        "trace": "experiment-trace.csv",
        "summary": "experiment-summary.json",
    }


def test_name_feeds_default_output_paths():
    cfg = parse_config_text(
        cfg_text(
            """\
            [experiment]
            kind = crossed-limit
            name = demo-run
            seed = 1

            [operator]
            source = random
            size = 5
            """
        )
    )
    assert cfg.outputs["trace"] == "demo-run-trace.csv"
    assert cfg.outputs["measure"] == "demo-run-measure.csv"
    assert cfg.outputs["measure-limit"] == "demo-run-limit-measure.csv"


def test_explicit_parameters_and_outputs():
    cfg = parse_config_text(
        cfg_text(
            """\
            [experiment]
            kind = brown-equality
            seed = 3

            [operator]
            source = random
            size = 16
            trials = 4
            zero-weight-prob = 0.25

            [parameters]
            distance-tol = 1e-7
            theta-grid = 12
            rotation-tol = 1e-8

            [output]
            summary = out.json
            """
        )
    )
    assert cfg.trials == 4
    assert cfg.zero_weight_prob == 0.25
    assert cfg.distance_tol == 1e-7
    assert cfg.theta_grid == 12
    assert cfg.outputs["summary"] == "out.json"


@pytest.mark.parametrize(
    "mutation,message_part",
    [
        ("kind = frobnicate", "unknown kind"),
        ("", "missing mandatory key 'experiment.kind'"),
    ],
)
def test_kind_validation(mutation, message_part):
    text = cfg_text(
        f"""\
        [experiment]
        {mutation}
        seed = 1

        [operator]
        source = random
        size = 4
        """
    )
    with pytest.raises(ConfigError, match=message_part):
        parse_config_text(text)


def test_random_source_requires_seed():
    text = cfg_text(
        """\
        [experiment]
        kind = aluthge-iterate

        [operator]
        source = random
        size = 4
        """
    )
    with pytest.raises(ConfigError, match="seed is mandatory"):
        parse_config_text(text)


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config_text(MINIMAL_ITERATE + "\n[extras]\nfoo = 1\n")


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key 'experiment.verbosity'"):
        parse_config_text(MINIMAL_ITERATE.replace("seed = 7", "seed = 7\nverbosity = 3"))


def test_default_section_rejected():
    with pytest.raises(ConfigError, match="DEFAULT"):
        parse_config_text("[DEFAULT]\nkind = aluthge-iterate\n" + MINIMAL_ITERATE)


def test_duplicate_key_reports_line():
    with pytest.raises(ConfigError, match="line"):
        parse_config_text(MINIMAL_ITERATE.replace("size = 6", "size = 6\nsize = 7"))


def test_kind_source_compatibility():
    text = cfg_text(
        """\
        [experiment]
        kind = bound-check
        seed = 5

        [operator]
        source = matrix-file
        path = op.txt
        """
    )
    with pytest.raises(ConfigError, match="does not accept source"):
        parse_config_text(text)


def test_trials_only_for_multi_trial_kinds():
    with pytest.raises(ConfigError, match="single trial"):
        parse_config_text(MINIMAL_ITERATE.replace("size = 6", "size = 6\ntrials = 3"))


def test_zero_weight_prob_needs_permutation_weights():
    with pytest.raises(ConfigError, match="permutation-weight"):
        parse_config_text(
            MINIMAL_ITERATE.replace("size = 6", "size = 6\nzero-weight-prob = 0.2")
        )


def test_zero_weight_prob_range():
    text = cfg_text(
        """\
        [experiment]
        kind = crossed-limit
        seed = 2

        [operator]
        source = random
        size = 5
        zero-weight-prob = 1.0
        """
    )
    with pytest.raises(ConfigError, match=r"\[0, 1\)"):
        parse_config_text(text)


def test_parameters_are_kind_scoped():
    # a brown-equality key on an iterate run is a config error, not a silent no-op
    with pytest.raises(ConfigError, match="does not accept key"):
        parse_config_text(MINIMAL_ITERATE + "\n[parameters]\ndistance-tol = 1e-8\n")


def test_surrogate_radius_requires_eps():
    text = cfg_text(
        """\
        [experiment]
        kind = bound-check
        seed = 9

        [operator]
        source = random
        size = 8
        trials = 2

        [parameters]
        surrogate-radius = 2.0
        """
    )
    with pytest.raises(ConfigError, match="requires 'parameters.surrogate-eps'"):
        parse_config_text(text)


def test_output_paths_must_differ():
    text = MINIMAL_ITERATE + "\n[output]\ntrace = same.csv\nsummary = same.csv\n"
    with pytest.raises(ConfigError, match="pairwise distinct"):
        parse_config_text(text)


def test_output_keys_are_kind_scoped():
    with pytest.raises(ConfigError, match="does not write output"):
        parse_config_text(MINIMAL_ITERATE + "\n[output]\nmeasure = m.csv\n")


def test_ergodic_average_always_needs_seed():
    # even with a file-backed operator the probe vector is random
    text = cfg_text(
        """\
        [experiment]
        kind = ergodic-average

        [operator]
        source = permutation-file
        path = op.txt
        """
    )
    with pytest.raises(ConfigError, match="needs 'experiment.seed'"):
        parse_config_text(text)


def test_file_source_rejects_random_only_keys():
    text = cfg_text(
        """\
        [experiment]
        kind = crossed-limit
        seed = 4

        [operator]
        source = permutation-file
        path = op.txt
        size = 5
        """
    )
    with pytest.raises(ConfigError, match="only for source 'random'"):
        parse_config_text(text)


def test_parse_config_resolves_relative_operator_path(tmp_path):
    cfg_file = tmp_path / "exp.cfg"
    cfg_file.write_text(
        cfg_text(
            """\
            [experiment]
            kind = crossed-limit
            seed = 1

            [operator]
            source = permutation-file
            path = op.txt
            """
        )
    )
    cfg = parse_config(cfg_file)
    assert cfg.path == str(tmp_path / "op.txt")
    assert cfg.name == "exp"  # file stem names the experiment


def test_parse_config_missing_file():
    with pytest.raises(ConfigError, match="cannot read config"):
        parse_config("/nonexistent/path.cfg")
