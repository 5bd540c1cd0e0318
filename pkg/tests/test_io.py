import logging
from importlib.resources import files

import numpy as np
import pytest

from netcatalyst.io import (CompositionError, FormatError, MissingFileError, SelfLoopError, SpecFileError,
                            UnknownNodeError, WaveGapError, load_panel, parse_experiment_config, parse_model_file,
                            read_nodes, save_panel, thread_count)
from netcatalyst.saom import SaomSpec, target_statistics

DEMO = files("netcatalyst") / "data" / "demo"
NODES = "node_id\tcountry\tsize\na\tUS\t1\nb\tJP\t2\nc\tUS\t\n"


def demo_panel(membership=True):
    return load_panel(DEMO / "edges.tsv", DEMO / "nodes.tsv", DEMO / "composition.tsv",
                      DEMO / "membership.tsv" if membership else None)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestDemo:
    def test_shape(self):
        panel = demo_panel()
        assert panel.n == 6 and len(panel.waves) == 2
        assert panel.waves[0].num_edges == 4 and panel.waves[1].num_edges == 6
        assert panel.entry[5] == 1

    def test_rate_target(self):
        panel = demo_panel()
        assert target_statistics(panel, SaomSpec.of("density"))[0] == 4

    def test_attributes(self):
        panel = demo_panel()
        a = panel.attributes[1]
        assert list(a.categorical["country"]) == ["US", "US", "JP", "JP", "DE", "US"]
        assert np.isnan(a.numeric["size"][2])
        assert list(a.numeric["member"]) == [1, 1, 1, 0, 0, 0]
        assert list(panel.attributes[0].numeric["member"]) == [1, 1, 0, 0, 0, 0]


class TestErrors:
    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingFileError, match="not found"):
            load_panel(tmp_path / "nope.tsv", DEMO / "nodes.tsv")

    @pytest.mark.parametrize("rows,error,line", [
        ("1\ta\ta\n", SelfLoopError, 2),
        ("1\ta\tb\n1\ta\tz\n", UnknownNodeError, 3),
        ("1\ta\tb\n3\tb\tc\n", WaveGapError, 3),
        ("x\ta\tb\n", FormatError, 2),
        ("1\ta\n", FormatError, 2),
    ])
    def test_edge_errors_name_file_and_line(self, tmp_path, rows, error, line):
        edges = write(tmp_path, "edges.tsv", "wave\tnode_a\tnode_b\n" + rows)
        nodes = write(tmp_path, "nodes.tsv", NODES)
        with pytest.raises(error) as info:
            load_panel(edges, nodes)
        assert info.value.line == line and info.value.path == str(edges)
        assert f"edges.tsv:{line}" in str(info.value)

    def test_bad_header(self, tmp_path):
        edges = write(tmp_path, "edges.tsv", "w\ta\tb\n1\ta\tb\n")
        with pytest.raises(FormatError, match=":1"):
            load_panel(edges, write(tmp_path, "nodes.tsv", NODES))

    def test_composition_errors(self, tmp_path):
        edges = write(tmp_path, "edges.tsv", "wave\tnode_a\tnode_b\n1\ta\tb\n2\ta\tc\n")
        nodes = write(tmp_path, "nodes.tsv", NODES)
        comp = write(tmp_path, "comp.tsv", "node_id\tentry_wave\texit_wave\nc\t1\t3\n")
        with pytest.raises(CompositionError, match="comp.tsv:2"):
            load_panel(edges, nodes, comp)
        comp = write(tmp_path, "comp.tsv", "node_id\tentry_wave\texit_wave\nb\t2\t2\n")
        with pytest.raises(CompositionError, match="edges.tsv:2"):
            load_panel(edges, nodes, comp)

    def test_nodes_errors(self, tmp_path):
        with pytest.raises(FormatError, match="nodes.tsv:3"):
            read_nodes(write(tmp_path, "nodes.tsv", "node_id\tsize\na\t1\na\t2\n"))
        with pytest.raises(FormatError, match="nodes.tsv:2"):
            read_nodes(write(tmp_path, "nodes.tsv", "node_id\tsize\na\tbig\n"))

    def test_duplicate_edges_warned(self, tmp_path, caplog):
        edges = write(tmp_path, "edges.tsv", "wave\tnode_a\tnode_b\n1\ta\tb\n1\tb\ta\n2\ta\tb\n")
        with caplog.at_level(logging.WARNING):
            panel = load_panel(edges, write(tmp_path, "nodes.tsv", NODES))
        assert panel.waves[0].num_edges == 1
        assert "duplicate of line 2" in caplog.text


class TestRoundTrip:
    def test_save_load(self, tmp_path):
        panel = demo_panel()
        paths = save_panel(panel, tmp_path)
        again = load_panel(paths["edges"], paths["nodes"], paths["composition"], paths["membership"])
        assert again.node_ids == panel.node_ids
        assert all(a == b for a, b in zip(again.waves, panel.waves))
        assert np.array_equal(again.entry, panel.entry) and np.array_equal(again.exit, panel.exit)
        for a, b in zip(again.attributes, panel.attributes):
            assert np.array_equal(a.numeric["size"], b.numeric["size"], equal_nan=True)
            assert np.array_equal(a.numeric["member"], b.numeric["member"])
        first = paths["edges"].read_bytes()
        save_panel(again, tmp_path)
        assert paths["edges"].read_bytes() == first


class TestModelFile:
    def test_demo_files(self):
        m = parse_model_file(DEMO / "model.spec")
        spec = m.saom_spec(1)
        assert spec.names == ["rate 1", "density"] and spec.rates[0] == 1.0
        assert parse_model_file(DEMO / "ergm.spec").ergm_spec().names == ["edges"]

    def test_options(self, tmp_path):
        p = write(tmp_path, "m.spec", "effect edges fix=-2\neffect gwesp decay=0.7 init=0.3  # comment\n"
                                      "effect nodefactor attr=country level=US\n")
        spec = parse_model_file(p).ergm_spec()
        assert spec.fixed == (True, False, False)
        assert list(spec.params) == [-2.0, 0.3, 0.0]
        assert spec.effects[1].decay == 0.7

    @pytest.mark.parametrize("text,line", [
        ("effect edges\neffect triangel\n", 2),
        ("effect edges\n\nefect triangles\n", 3),
        ("effect edges colour=red\n", 1),
        ("effect edges init=abc\n", 1),
        ("rate 1 init=-1\neffect edges\n", 1),
    ])
    def test_errors_name_line(self, tmp_path, text, line):
        p = write(tmp_path, "m.spec", text)
        with pytest.raises(SpecFileError, match=f"m.spec:{line}"):
            parse_model_file(p).ergm_spec()

    def test_saom_checks(self, tmp_path):
        with pytest.raises(SpecFileError, match="m.spec:2"):
            parse_model_file(write(tmp_path, "m.spec", "effect density\neffect gwesp\n")).saom_spec(1)
        with pytest.raises(SpecFileError, match="m.spec:1"):
            parse_model_file(write(tmp_path, "m.spec", "rate 3 init=2\neffect density\n")).saom_spec(2)


class TestExperimentConfig:
    def test_demo(self):
        cfg = parse_experiment_config(DEMO / "experiment.ini", seed=7, workers=2)
        assert (cfg.n, cfg.waves, cfg.rate, cfg.replicates, cfg.seed, cfg.workers) == (30, 4, 2.0, 200, 7, 2)
        assert list(cfg.spec.beta) == [-1.5, 0.2, 0.1]
        assert cfg.plan.targets == (0, 1, 2, 3, 4) and cfg.plan.active_waves == {1, 2}

    def test_null_and_errors(self, tmp_path):
        base = "[experiment]\nn = 10\nwaves = 2\nrate = 1\nreplicates = 5\neffects = density=-1\n"
        assert parse_experiment_config(write(tmp_path, "a.ini", base), 0).plan is None
        with pytest.raises(SpecFileError):
            parse_experiment_config(write(tmp_path, "b.ini", base.replace("density=-1", "densty=-1")), 0)
        with pytest.raises(SpecFileError):
            parse_experiment_config(write(tmp_path, "c.ini", base.replace("n = 10\n", "")), 0)
        with pytest.raises(SpecFileError):
            parse_experiment_config(tmp_path / "missing.ini", 0)


def test_thread_count(monkeypatch):
    monkeypatch.setenv("NETCATALYST_THREADS", "3")
    assert thread_count(2) == 2
    assert thread_count(None) == 3
    monkeypatch.delenv("NETCATALYST_THREADS")
    assert thread_count(None) >= 1
