import pytest
import yaml

from vdp.errors import ConfigError, ManifestError, ValidationError
from vdp.filtering import FilterConfig
from vdp.manifest import (
    Query,
    build_manifest,
    manifest_from_dict,
    manifest_path,
    query,
    read_manifest,
    utc_timestamp,
    write_manifest,
)
from vdp.scenes import SceneCategory

from factories import random_manifest, random_outcome


@pytest.fixture
def manifest(rng):
    return random_manifest(rng, "0007")


class TestBuildManifest:
    def test_partitions_frames_by_stage(self, rng):
        outcome = random_outcome(rng, 25)
        m = build_manifest("0001", FilterConfig(), outcome, created_at="2024-05-06T07:08:09Z")
        stages = {"none": 0, "vol": 0, "ssim": 0}
        for fr in m.frames:
            stages[fr.removal_stage] += 1
        assert stages["none"] == len(outcome.retained)
        assert stages["vol"] == len(outcome.removed_by_vol)
        assert stages["ssim"] == len(outcome.removed_by_ssim)
        assert m.frame_count == 25

    def test_untagged_manifest_defaults_to_unknown(self, rng):
        outcome = random_outcome(rng, 5)
        m = build_manifest("0001", FilterConfig(), outcome, created_at="2024-05-06T07:08:09Z")
        assert m.sequence_scene == "Unknown"
        assert m.histogram["Unknown"] == 100.0
        assert all(fr.scene == "Unknown" for fr in m.frames)

    def test_ssim_value_recorded_only_for_ssim_stage(self, manifest):
        for fr in manifest.frames:
            assert (fr.ssim is not None) == (fr.removal_stage == "ssim")

    def test_decode_errors_recorded_separately(self, rng):
        outcome = random_outcome(rng, 10)
        outcome.errors = outcome.errors or []
        m = build_manifest("0001", FilterConfig(), outcome, created_at="2024-05-06T07:08:09Z")
        assert m.frame_count == len(m.frames) == 10
        for err in m.errors:
            assert set(err) == {"frame_id", "path", "message"}


class TestRoundTrip:
    def test_write_read_equal(self, manifest, tmp_path):
        path = tmp_path / "m.yaml"
        write_manifest(manifest, path)
        assert read_manifest(path) == manifest

    def test_write_read_write_byte_identical(self, manifest, tmp_path):
        p1, p2 = tmp_path / "a.yaml", tmp_path / "b.yaml"
        write_manifest(manifest, p1)
        write_manifest(read_manifest(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_no_temp_files_left(self, manifest, tmp_path):
        write_manifest(manifest, tmp_path / "m.yaml")
        assert [p.name for p in tmp_path.iterdir()] == ["m.yaml"]

    def test_key_order_deterministic(self, manifest, tmp_path):
        path = tmp_path / "m.yaml"
        write_manifest(manifest, path)
        doc = list(yaml.safe_load(path.read_text()))
        assert doc[:3] == ["schema_version", "sequence_id", "created_at"]

    def test_invalid_manifest_not_written(self, manifest, tmp_path):
        manifest.frame_count += 1
        path = tmp_path / "m.yaml"
        with pytest.raises(ValidationError):
            write_manifest(manifest, path)
        assert not path.exists()

    def test_unwritable_path_is_os_error(self, manifest, tmp_path):
        with pytest.raises(OSError):
            write_manifest(manifest, tmp_path / "absent_dir" / "m.yaml")


class TestReadValidation:
    def _doc(self, manifest):
        return manifest.to_dict()

    def test_role_stage_mismatch_names_key(self, manifest, tmp_path):
        doc = self._doc(manifest)
        doc["frames"][0]["removal_stage"] = "vol"
        doc["frames"][0]["role"] = "train"
        doc["frames"][0].pop("ssim", None)
        with pytest.raises(ValidationError) as exc:
            manifest_from_dict(doc)
        assert "frames[0].role" in str(exc.value)

    def test_frame_count_mismatch(self, manifest):
        doc = self._doc(manifest)
        doc["frame_count"] += 2
        with pytest.raises(ValidationError) as exc:
            manifest_from_dict(doc)
        assert "frame_count" in str(exc.value)

    def test_histogram_must_sum_to_100(self, manifest):
        doc = self._doc(manifest)
        doc["histogram"]["City"] = doc["histogram"].get("City", 0.0) + 5.0
        with pytest.raises(ValidationError) as exc:
            manifest_from_dict(doc)
        assert "histogram" in str(exc.value)

    def test_missing_key_named(self, manifest):
        doc = self._doc(manifest)
        del doc["vol_stats"]
        with pytest.raises(ValidationError) as exc:
            manifest_from_dict(doc)
        assert "vol_stats" in str(exc.value)

    def test_bad_timestamp(self, manifest):
        doc = self._doc(manifest)
        doc["created_at"] = "yesterday"
        with pytest.raises(ValidationError) as exc:
            manifest_from_dict(doc)
        assert "created_at" in str(exc.value)

    def test_bad_schema_version(self, manifest):
        doc = self._doc(manifest)
        doc["schema_version"] = 99
        with pytest.raises(ValidationError) as exc:
            manifest_from_dict(doc)
        assert "schema_version" in str(exc.value)

    def test_ratio_inconsistent_with_stages(self, manifest):
        doc = self._doc(manifest)
        doc["removal_ratio_vol"] = 0.987654321
        with pytest.raises(ValidationError):
            manifest_from_dict(doc)

    def test_unparseable_yaml(self, tmp_path):
        path = tmp_path / "m.yaml"
        path.write_text("frames: [unclosed")
        with pytest.raises(ManifestError):
            read_manifest(path)

    def test_non_mapping_document(self, tmp_path):
        path = tmp_path / "m.yaml"
        path.write_text("- just\n- a\n- list\n")
        with pytest.raises(ManifestError):
            read_manifest(path)

    def test_missing_file_is_os_error(self, tmp_path):
        with pytest.raises(OSError):
            read_manifest(tmp_path / "absent.yaml")


def _write_corpus(rng, manifest_dir, count=6):
    manifests = []
    for i in range(count):
        m = random_manifest(rng, f"{i:04d}")
        write_manifest(m, manifest_path(manifest_dir, m.sequence_id))
        manifests.append(m)
    return manifests


class TestQuery:
    def test_scene_filter_and_order(self, rng, tmp_path):
        manifests = _write_corpus(rng, tmp_path)
        q = Query(scenes={SceneCategory.CITY})
        hits = query(tmp_path, q)
        expected = [
            (m.sequence_id, fr.frame_id)
            for m in manifests
            for fr in m.frames
            if fr.scene == "City"
        ]
        assert [(h.sequence_id, h.frame_id) for h in hits] == expected
        assert all(h.scene == "City" for h in hits)

    def test_union_of_scenes(self, rng, tmp_path):
        manifests = _write_corpus(rng, tmp_path)
        both = query(tmp_path, Query(scenes={SceneCategory.CITY, SceneCategory.FREEWAY}))
        city = query(tmp_path, Query(scenes={SceneCategory.CITY}))
        freeway = query(tmp_path, Query(scenes={SceneCategory.FREEWAY}))
        assert len(both) == len(city) + len(freeway)

    def test_role_partition(self, rng, tmp_path):
        _write_corpus(rng, tmp_path)
        scenes = set(SceneCategory)
        all_hits = query(tmp_path, Query(scenes=scenes))
        train = query(tmp_path, Query(scenes=scenes, role="train"))
        test = query(tmp_path, Query(scenes=scenes, role="test"))
        assert len(train) + len(test) == len(all_hits)
        train_keys = {(h.sequence_id, h.frame_id) for h in train}
        test_keys = {(h.sequence_id, h.frame_id) for h in test}
        assert not train_keys & test_keys

    def test_min_vol(self, rng, tmp_path):
        manifests = _write_corpus(rng, tmp_path)
        hits = query(tmp_path, Query(scenes=set(SceneCategory), min_vol=1000.0))
        by_key = {
            (m.sequence_id, fr.frame_id): fr.vol for m in manifests for fr in m.frames
        }
        assert hits
        assert all(by_key[(h.sequence_id, h.frame_id)] >= 1000.0 for h in hits)

    def test_no_matches_is_empty(self, rng, tmp_path):
        m = random_manifest(rng, "0001")
        for fr in m.frames:
            fr.scene = "City"
        m.sequence_scene = "City"
        m.histogram = {"City": 100.0}
        write_manifest(m, manifest_path(tmp_path, "0001"))
        assert query(tmp_path, Query(scenes={SceneCategory.UNKNOWN})) == []

    def test_unreadable_manifest_skipped_with_warning(self, rng, tmp_path, caplog):
        _write_corpus(rng, tmp_path, count=2)
        (tmp_path / "junk.manifest.yaml").write_text("frames: [")
        with caplog.at_level("WARNING", logger="vdp.manifest"):
            hits = query(tmp_path, Query(scenes=set(SceneCategory)))
        assert hits
        assert any("junk.manifest.yaml" in rec.getMessage() for rec in caplog.records)

    def test_empty_scenes_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            query(tmp_path, Query(scenes=set()))

    def test_bad_role_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            query(tmp_path, Query(scenes={SceneCategory.CITY}, role="validation"))


class TestTimestamp:
    def test_format(self):
        from datetime import datetime, timezone

        stamp = utc_timestamp(datetime(2024, 3, 4, 5, 6, 7, 890123, tzinfo=timezone.utc))
        assert stamp == "2024-03-04T05:06:07Z"

    def test_now_parses(self):
        from datetime import datetime

        stamp = utc_timestamp()
        datetime.fromisoformat(stamp.replace("Z", "+00:00"))
