import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emoedit.manifest import ManifestError, PairRecord, manifest_read, manifest_write
from emoedit.taxonomy import EMOTIONS


def _rec(i=0, **kw):
    base = dict(
        source_path=f"src_{i}.png",
        target_path=f"tgt_{i}.png",
        source_emotion="awe",
        target_emotion="fear",
        instruction="make it scary",
        subset_tag="EPGS",
        provenance="test",
    )
    base.update(kw)
    return PairRecord(**base)


def test_round_trip(tmp_path):
    records = [_rec(i) for i in range(3)]
    path = tmp_path / "m.jsonl"
    assert manifest_write(records, path) == 3
    assert manifest_read(path) == records


def test_empty_round_trip(tmp_path):
    path = tmp_path / "m.jsonl"
    manifest_write([], path)
    assert path.read_text() == ""
    assert manifest_read(path) == []


def test_corrupted_line_names_line_number(tmp_path):
    records = [_rec(i) for i in range(10)]
    path = tmp_path / "m.jsonl"
    manifest_write(records, path)
    lines = path.read_text().splitlines()
    lines[4] = lines[4][: len(lines[4]) // 2]  # byte-mangle line 5
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ManifestError, match="line 5"):
        manifest_read(path)


def test_missing_image_validation(tmp_path):
    path = tmp_path / "m.jsonl"
    manifest_write([_rec()], path)
    with pytest.raises(ManifestError, match="src_0.png"):
        manifest_read(path, check_images=True)


def test_record_invariants():
    with pytest.raises(ValueError):
        _rec(instruction="")
    with pytest.raises(ValueError):
        _rec(subset_tag="OTHER")
    with pytest.raises(ValueError):
        _rec(source_emotion="joy")


_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\n"),
    min_size=1,
    max_size=40,
)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(
        st.builds(
            PairRecord,
            source_path=_text,
            target_path=_text,
            source_emotion=st.sampled_from(EMOTIONS),
            target_emotion=st.sampled_from(EMOTIONS),
            instruction=_text,
            subset_tag=st.sampled_from(["EPAS", "EPGS"]),
            provenance=_text,
        ),
        max_size=8,
    )
)
def test_round_trip_property(tmp_path_factory, records):
    path = tmp_path_factory.mktemp("m") / "m.jsonl"
    manifest_write(records, path)
    assert manifest_read(path) == records
