"""End-to-end CLI behavior: exit codes, outputs, determinism."""

import io
import json
from types import SimpleNamespace

import numpy as np
import pytest

from sparseprompt import (
    BinaryMask,
    Image,
    PipelineError,
    TransportError,
    load_manifest,
    load_mask,
    write_bundle,
)
from sparseprompt.cli import (
    EXIT_BACKEND_ERROR,
    EXIT_EPISODE_FAILURES,
    EXIT_INPUT_ERROR,
    EXIT_OK,
    _is_transport_failure,
    _report_failures,
    main,
)
from sparseprompt.pngio import image_to_png_bytes, save_image, save_mask

from wire_stub import StubState, png_digest, run_stub

RESULTS_HEADER = b"episode_id,class,selected_density,n_matched,n_pruned,n_sparse,iou\n"


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    root = tmp_path_factory.mktemp("bundle")
    return write_bundle(root, n_episodes=6, seed=11)


def output_bytes(out_dir, skip=("run.log",)):
    """{relative path: bytes} for every file under out_dir, minus skips."""
    return {
        str(p.relative_to(out_dir)): p.read_bytes()
        for p in sorted(out_dir.rglob("*"))
        if p.is_file() and p.name not in skip
    }


def read_traces(out_dir):
    return {
        p.stem: json.loads(p.read_text()) for p in (out_dir / "traces").glob("*.json")
    }


class TestRun:
    def test_oracle_run_succeeds(self, bundle, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["run", "--manifest", str(bundle), "--out", str(out)]) == EXIT_OK
        assert "6/6 episodes" in capsys.readouterr().out

        csv = (out / "results.csv").read_bytes()
        assert csv.startswith(RESULTS_HEADER)
        body = csv[len(RESULTS_HEADER):].decode().strip().splitlines()
        assert len(body) == 6
        assert all(line.endswith(",1.000000") for line in body)

        assert sorted(p.name for p in (out / "masks").glob("*.png")) == [
            f"ep{n:03d}.png" for n in range(6)
        ]
        traces = read_traces(out)
        assert set(traces) == {f"ep{n:03d}" for n in range(6)}
        for t in traces.values():
            stages = dict((s, c) for s, c in t["stages"])
            assert stages["match"] >= stages["prune"] >= stages["sparsify"]
            assert t["iou"] == 1.0

        log = (out / "run.log").read_text()
        assert "episodes=6 succeeded=6 failed=0" in log

    def test_outputs_are_deterministic_across_runs_and_jobs(self, bundle, tmp_path):
        outs = []
        for name, jobs in (("a", "1"), ("b", "1"), ("c", "4")):
            out = tmp_path / name
            code = main(
                ["run", "--manifest", str(bundle), "--out", str(out), "--jobs", jobs]
            )
            assert code == EXIT_OK
            outs.append(output_bytes(out))
        assert outs[0] == outs[1] == outs[2]

    def test_failed_episode_exits_one_and_is_reported(self, tmp_path, capsys):
        # white reference pattern, all-black target: matching finds nothing
        ref = np.zeros((64, 64), dtype=np.uint8)
        ref[16:48, 16:48] = 255
        ref_mask = np.zeros((64, 64), dtype=bool)
        ref_mask[16:48, 16:48] = True
        save_image(Image(ref), tmp_path / "ref.png")
        save_mask(BinaryMask(ref_mask), tmp_path / "ref_mask.png")
        save_image(Image(np.zeros((64, 64), dtype=np.uint8)), tmp_path / "black.png")
        manifest = tmp_path / "manifest.json"
        manifest.write_text(
            json.dumps(
                {
                    "episodes": [
                        {
                            "id": "ep0",
                            "class": "block",
                            "references": [{"image": "ref.png", "mask": "ref_mask.png"}],
                            "target": {"image": "black.png", "mask": None},
                        }
                    ]
                }
            )
        )
        out = tmp_path / "out"
        code = main(["run", "--manifest", str(manifest), "--out", str(out)])
        captured = capsys.readouterr()
        assert code == EXIT_EPISODE_FAILURES
        assert "0/1 episodes" in captured.out
        assert "episode ep0 failed: match:" in captured.err
        assert (out / "results.csv").read_bytes() == RESULTS_HEADER

    def test_one_failure_does_not_stop_other_episodes(self, tmp_path, capsys):
        ref = np.full((64, 64), 30, dtype=np.uint8)
        ref[16:48, 16:48] = 200
        ref_mask = np.zeros((64, 64), dtype=bool)
        ref_mask[16:48, 16:48] = True
        save_image(Image(ref), tmp_path / "ref.png")
        save_mask(BinaryMask(ref_mask), tmp_path / "ref_mask.png")
        save_image(Image(np.full((64, 64), 30, dtype=np.uint8)), tmp_path / "flat.png")
        ref_entry = [{"image": "ref.png", "mask": "ref_mask.png"}]
        manifest = tmp_path / "manifest.json"
        manifest.write_text(
            json.dumps(
                {
                    "episodes": [
                        {
                            "id": "bad",
                            "class": "block",
                            "references": ref_entry,
                            # featureless target: matching cannot anchor
                            "target": {"image": "flat.png", "mask": None},
                        },
                        {
                            "id": "good",
                            "class": "block",
                            "references": ref_entry,
                            "target": {"image": "ref.png", "mask": "ref_mask.png"},
                        },
                    ]
                }
            )
        )
        out = tmp_path / "out"
        code = main(["run", "--manifest", str(manifest), "--out", str(out)])
        captured = capsys.readouterr()
        assert code == EXIT_EPISODE_FAILURES
        assert "1/2 episodes" in captured.out
        assert "episode bad failed" in captured.err
        assert (out / "masks" / "good.png").exists()
        assert not (out / "masks" / "bad.png").exists()
        rows = (out / "results.csv").read_bytes().splitlines()
        assert len(rows) == 2 and rows[1].startswith(b"good,")

    def test_missing_manifest_exits_two(self, tmp_path, capsys):
        code = main(
            ["run", "--manifest", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]
        )
        assert code == EXIT_INPUT_ERROR
        assert "error:" in capsys.readouterr().err

    def test_dead_remote_exits_three(self, bundle, tmp_path, capsys):
        code = main(
            [
                "run",
                "--manifest",
                str(bundle),
                "--out",
                str(tmp_path / "o"),
                "--backend",
                "remote",
                "--base-url",
                "http://127.0.0.1:1",
            ]
        )
        assert code == EXIT_BACKEND_ERROR
        assert "error:" in capsys.readouterr().err


class TestPipelineFlags:
    def test_sparsify_off_and_no_prune_show_in_traces(self, bundle, tmp_path):
        out = tmp_path / "out"
        code = main(
            [
                "run",
                "--manifest",
                str(bundle),
                "--out",
                str(out),
                "--sparsify",
                "off",
                "--no-prune",
            ]
        )
        assert code == EXIT_OK
        for t in read_traces(out).values():
            stages = dict((s, c) for s, c in t["stages"])
            assert t["selected_density"] is None
            assert stages["match"] == stages["prune"] == stages["sparsify"]

    def test_fixed_sparsify_bounds_prompts(self, bundle, tmp_path):
        out = tmp_path / "out"
        assert (
            main(
                ["run", "--manifest", str(bundle), "--out", str(out), "--sparsify", "fixed:3"]
            )
            == EXIT_OK
        )
        for t in read_traces(out).values():
            assert t["selected_density"] == 3
            assert dict(map(tuple, t["stages"]))["sparsify"] <= 9

    def test_bad_sparsify_value_exits_two(self, bundle, tmp_path, capsys):
        code = main(
            ["run", "--manifest", str(bundle), "--out", str(tmp_path / "o"), "--sparsify", "fixed:0"]
        )
        assert code == EXIT_INPUT_ERROR
        assert "density" in capsys.readouterr().err

    def test_bad_densities_value_exits_two(self, bundle, tmp_path, capsys):
        code = main(
            ["run", "--manifest", str(bundle), "--out", str(tmp_path / "o"), "--densities", "2,x"]
        )
        assert code == EXIT_INPUT_ERROR
        capsys.readouterr()


class TestConfigFile:
    def write_config(self, root, payload):
        path = root / "config.json"
        path.write_text(json.dumps(payload))
        return path

    def test_config_file_drives_pipeline(self, bundle, tmp_path):
        cfg = self.write_config(tmp_path, {"pipeline": {"sparsify": "off"}})
        out = tmp_path / "out"
        assert (
            main(["run", "--manifest", str(bundle), "--out", str(out), "--config", str(cfg)])
            == EXIT_OK
        )
        assert all(t["selected_density"] is None for t in read_traces(out).values())

    def test_flags_override_config_file(self, bundle, tmp_path):
        cfg = self.write_config(tmp_path, {"pipeline": {"sparsify": "off"}})
        out = tmp_path / "out"
        code = main(
            [
                "run",
                "--manifest",
                str(bundle),
                "--out",
                str(out),
                "--config",
                str(cfg),
                "--sparsify",
                "fixed:3",
            ]
        )
        assert code == EXIT_OK
        assert all(t["selected_density"] == 3 for t in read_traces(out).values())

    def test_oracle_spec_path_resolves_next_to_config(self, bundle, tmp_path, capsys):
        sub = tmp_path / "conf"
        sub.mkdir()
        (sub / "oracle.json").write_text(json.dumps({"mode": "perfect"}))
        cfg = self.write_config(sub, {"backend": {"kind": "oracle", "spec": "oracle.json"}})
        code = main(["health", "--config", str(cfg)])
        assert code == EXIT_OK
        assert "mode=perfect" in capsys.readouterr().out

    def test_bad_config_json_exits_two(self, bundle, tmp_path, capsys):
        cfg = tmp_path / "config.json"
        cfg.write_text("{oops")
        code = main(
            ["run", "--manifest", str(bundle), "--out", str(tmp_path / "o"), "--config", str(cfg)]
        )
        assert code == EXIT_INPUT_ERROR
        assert "not valid JSON" in capsys.readouterr().err

    def test_bad_oracle_spec_exits_two(self, bundle, tmp_path, capsys):
        (tmp_path / "oracle.json").write_text(json.dumps({"mode": "nope"}))
        cfg = self.write_config(tmp_path, {"backend": {"kind": "oracle", "spec": "oracle.json"}})
        code = main(
            ["run", "--manifest", str(bundle), "--out", str(tmp_path / "o"), "--config", str(cfg)]
        )
        assert code == EXIT_INPUT_ERROR
        assert "bad oracle spec" in capsys.readouterr().err


class TestEval:
    def test_oracle_eval_reports_perfect_miou(self, bundle, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["eval", "--manifest", str(bundle), "--out", str(out)]) == EXIT_OK
        stdout = capsys.readouterr().out
        assert "overall: n=6 mIoU=100.0%" in stdout
        assert "block-a: n=2 mIoU=100.0%" in stdout
        per_class = (out / "per_class.csv").read_text().splitlines()
        assert per_class[0] == "class,n_episodes,mean_iou"
        assert per_class[-1] == "__all__,6,1.000000"

    def test_eval_requires_ground_truth(self, tmp_path, capsys):
        manifest = write_bundle(tmp_path / "nogt", n_episodes=2, with_target_masks=False)
        code = main(["eval", "--manifest", str(manifest), "--out", str(tmp_path / "o")])
        assert code == EXIT_INPUT_ERROR
        assert "requires ground truth" in capsys.readouterr().err


class TestRemoteEndToEnd:
    def test_eval_against_stub_backend(self, tmp_path, capsys):
        manifest = write_bundle(tmp_path / "bundle", n_episodes=4, seed=11)
        state = StubState()
        for rec in load_manifest(manifest):
            pairs = list(rec.episode.references) + [(rec.episode.target, rec.episode.target_gt)]
            for img, mask in pairs:
                state.gt_by_digest[png_digest(image_to_png_bytes(img))] = np.array(mask.data)
        with run_stub(state) as (url, _):
            code = main(
                [
                    "eval",
                    "--manifest",
                    str(manifest),
                    "--out",
                    str(tmp_path / "out"),
                    "--backend",
                    "remote",
                    "--base-url",
                    url,
                    "--densities",
                    "2,4",
                ]
            )
        assert code == EXIT_OK
        assert "overall: n=4 mIoU=100.0%" in capsys.readouterr().out


class TestDensityStudy:
    def assets(self, tmp_path):
        img = np.full((64, 64), 30, dtype=np.uint8)
        img[8:56, 8:56] = 200
        gt = np.zeros((64, 64), dtype=bool)
        gt[8:56, 8:56] = True
        save_image(Image(img), tmp_path / "img.png")
        save_mask(BinaryMask(gt), tmp_path / "gt.png")
        return tmp_path / "img.png", tmp_path / "gt.png"

    def test_erosion_backend_study_golden(self, tmp_path, capsys):
        img, gt = self.assets(tmp_path)
        (tmp_path / "erosion.json").write_text(
            json.dumps({"mode": "erosion_proportional", "rate": 0.5})
        )
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps({"backend": {"kind": "oracle", "spec": "erosion.json"}}))
        out = tmp_path / "study.csv"
        code = main(
            [
                "density-study",
                "--image",
                str(img),
                "--mask",
                str(gt),
                "--densities",
                "2,4,8",
                "--out",
                str(out),
                "--config",
                str(cfg),
            ]
        )
        assert code == EXIT_OK
        assert out.read_bytes() == (
            b"density,n_points,iou\n"
            b"2,1,1.000000\n"
            b"4,9,0.694444\n"
            b"8,36,0.062500\n"
        )
        stdout = capsys.readouterr().out
        assert "density=2 points=1 iou=1.0000" in stdout
        assert "density=8 points=36 iou=0.0625" in stdout

    def test_perfect_backend_study_is_flat(self, tmp_path, capsys):
        img, gt = self.assets(tmp_path)
        out = tmp_path / "study.csv"
        code = main(
            ["density-study", "--image", str(img), "--mask", str(gt),
             "--densities", "2,4", "--out", str(out)]
        )
        assert code == EXIT_OK
        lines = out.read_text().splitlines()
        assert len(lines) == 3
        assert all(line.endswith("1.000000") for line in lines[1:])
        capsys.readouterr()

    def test_bad_densities_exit_two(self, tmp_path, capsys):
        img, gt = self.assets(tmp_path)
        code = main(
            ["density-study", "--image", str(img), "--mask", str(gt),
             "--densities", "0", "--out", str(tmp_path / "s.csv")]
        )
        assert code == EXIT_INPUT_ERROR
        capsys.readouterr()


class TestRefine:
    def test_refine_golden_and_idempotent(self, tmp_path):
        noisy = np.zeros((20, 20), dtype=bool)
        noisy[3:13, 3:13] = True
        noisy[17, 17] = True  # isolated speck must vanish
        save_mask(BinaryMask(noisy), tmp_path / "in.png")

        code = main(
            ["refine", str(tmp_path / "in.png"), str(tmp_path / "out.png"), "--kernel-radius", "1"]
        )
        assert code == EXIT_OK
        cleaned = load_mask(tmp_path / "out.png")
        want = np.zeros((20, 20), dtype=bool)
        want[3:13, 3:13] = True
        np.testing.assert_array_equal(cleaned.data, want)

        code = main(
            ["refine", str(tmp_path / "out.png"), str(tmp_path / "out2.png"), "--kernel-radius", "1"]
        )
        assert code == EXIT_OK
        assert (tmp_path / "out.png").read_bytes() == (tmp_path / "out2.png").read_bytes()

    def test_unreadable_mask_exits_two(self, tmp_path, capsys):
        code = main(["refine", str(tmp_path / "missing.png"), str(tmp_path / "out.png")])
        assert code == EXIT_INPUT_ERROR
        assert "cannot read mask" in capsys.readouterr().err


class TestHealth:
    def test_oracle_health(self, capsys):
        assert main(["health"]) == EXIT_OK
        assert "oracle backend ready (mode=perfect)" in capsys.readouterr().out

    def test_remote_health_reports_names(self, capsys):
        with run_stub(StubState(encoder_name="enc-a", segmenter_name="seg-b")) as (url, _):
            code = main(["health", "--backend", "remote", "--base-url", url])
        assert code == EXIT_OK
        assert "status=ok encoder=enc-a segmenter=seg-b" in capsys.readouterr().out

    def test_remote_health_dead_exits_three(self, capsys):
        code = main(["health", "--backend", "remote", "--base-url", "http://127.0.0.1:1"])
        assert code == EXIT_BACKEND_ERROR
        assert "error:" in capsys.readouterr().err

    def test_remote_without_url_exits_two(self, capsys):
        assert main(["health", "--backend", "remote"]) == EXIT_INPUT_ERROR
        assert "--base-url" in capsys.readouterr().err


class TestFailureClassification:
    def test_transport_failures_are_found_through_cause_chains(self):
        try:
            try:
                raise TransportError("socket closed")
            except TransportError as inner:
                raise PipelineError("segment", str(inner)) from inner
        except PipelineError as wrapped:
            assert _is_transport_failure(wrapped)
        assert not _is_transport_failure(PipelineError("match", "no candidates"))

    def test_report_failures_ranks_transport_over_episode(self):
        records = [SimpleNamespace(episode_id="ep0"), SimpleNamespace(episode_id="ep1")]
        try:
            raise TransportError("gone")
        except TransportError as e:
            transport_err = e
        sink = io.StringIO()
        assert (
            _report_failures(records, {0: PipelineError("match", "none")}, sink)
            == EXIT_EPISODE_FAILURES
        )
        assert (
            _report_failures(records, {1: transport_err}, sink) == EXIT_BACKEND_ERROR
        )
        assert "episode ep0 failed" in sink.getvalue()
        assert "episode ep1 failed" in sink.getvalue()
