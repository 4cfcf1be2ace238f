import numpy as np
import pytest

from conftest import synthetic_fer_rows, write_fer_csv
from emogen.data import (EMOTIONS, EmotionLabel, decode_image, encode_pgm,
                         load_fer_csv, load_gender_manifest, parse_pgm,
                         preprocess, resize_bilinear, write_pgm)
from emogen.errors import DecodeError, LabelError, ParseError, ShapeError


def test_emotion_label_bijection():
    assert EMOTIONS == ("angry", "disgust", "fear", "happy", "sad", "surprise", "neutral")
    for i, name in enumerate(EMOTIONS):
        assert EmotionLabel(i).name == name
        assert EmotionLabel.from_name(name).index == i
    with pytest.raises(LabelError):
        EmotionLabel(7)
    with pytest.raises(LabelError):
        EmotionLabel.from_name("bored")


def test_load_fer_csv_counts_and_values(tmp_path):
    rows = (synthetic_fer_rows(6, usage="Training")
            + synthetic_fer_rows(3, seed=1, usage="PublicTest")
            + synthetic_fer_rows(2, seed=2, usage="PrivateTest"))
    path = write_fer_csv(tmp_path / "fer.csv", rows)
    samples = load_fer_csv(path)
    assert len(samples) == 11
    assert sum(1 for s in samples if s.usage == "Training") == 6
    assert sum(1 for s in samples if s.usage != "Training") == 5
    s0 = samples[0]
    assert s0.pixels.shape == (48, 48) and s0.pixels.dtype == np.uint8
    np.testing.assert_array_equal(s0.pixels.ravel(), rows[0][1])


def test_load_fer_csv_short_pixel_row_names_row(tmp_path):
    good = synthetic_fer_rows(1)[0]
    path = tmp_path / "bad.csv"
    with open(path, "w") as fh:
        fh.write("emotion,pixels,Usage\n")
        fh.write(f"{good[0]},{' '.join(str(v) for v in good[1])},Training\n")
        fh.write(f"3,{' '.join('7' for _ in range(2303))},Training\n")
    with pytest.raises(ParseError, match="row 2"):
        load_fer_csv(path)


@pytest.mark.parametrize("mutate,msg", [
    (lambda r: ("9", r[1], r[2]), "outside"),
    (lambda r: ("x", r[1], r[2]), "non-integer emotion"),
    (lambda r: (r[0], r[1].replace(" 7 ", " x ", 1), r[2]), "pixel"),
    (lambda r: (r[0], r[1], "Testing"), "usage"),
])
def test_load_fer_csv_row_errors(tmp_path, mutate, msg):
    pixels = " ".join("7" for _ in range(2304))
    row = mutate(("3", pixels, "Training"))
    path = tmp_path / "bad.csv"
    with open(path, "w") as fh:
        fh.write("emotion,pixels,Usage\n")
        fh.write(",".join(row) + "\n")
    with pytest.raises(ParseError, match=msg):
        load_fer_csv(path)


def test_load_fer_csv_header_required(tmp_path):
    path = tmp_path / "noheader.csv"
    path.write_text("a,b,c\n")
    with pytest.raises(ParseError):
        load_fer_csv(path)


def test_gender_manifest_filter(tmp_path):
    path = tmp_path / "manifest.csv"
    path.write_text(
        "path,gender,face_score,second_face_score\n"
        "a.pgm,1,2.9,\n"          # below threshold: dropped
        "b.pgm,0,4.0,\n"          # kept
        "c.pgm,1,3.0,\n"          # boundary: kept
        "d.pgm,0,5.5,1.2\n"       # second face present: dropped
        "e.pgm,1,-inf,\n"         # no face: dropped
    )
    rows = load_gender_manifest(path)
    assert [(r.image_path, r.gender) for r in rows] == [("b.pgm", 0), ("c.pgm", 1)]
    assert all(r.second_face_score is None for r in rows)
    assert all(np.isfinite(r.face_score) and r.face_score >= 3.0 for r in rows)


def test_gender_manifest_hand_filter_oracle(tmp_path):
    records = [("p0", 1, 3.5, None), ("p1", 0, 2.0, None), ("p2", 1, 7.1, 0.4),
               ("p3", 0, 3.0, None), ("p4", 1, 10.0, None)]
    lines = ["path,gender,face_score,second_face_score"]
    for p, g, s, s2 in records:
        lines.append(f"{p},{g},{s},{'' if s2 is None else s2}")
    path = tmp_path / "m.csv"
    path.write_text("\n".join(lines) + "\n")
    kept = load_gender_manifest(path)
    expected = [p for p, g, s, s2 in records if s >= 3.0 and s2 is None]
    assert [r.image_path for r in kept] == expected


def test_gender_manifest_monotone_in_face_score(tmp_path):
    # raising a kept row's score never drops it
    base, raised = tmp_path / "a.csv", tmp_path / "b.csv"
    header = "path,gender,face_score,second_face_score\n"
    base.write_text(header + "x.pgm,1,3.2,\n")
    raised.write_text(header + "x.pgm,1,9.9,\n")
    assert len(load_gender_manifest(base)) == 1
    assert len(load_gender_manifest(raised)) == 1


def test_gender_manifest_malformed_rows(tmp_path):
    header = "path,gender,face_score,second_face_score\n"
    for bad, msg in [("x.pgm,2,4.0,", "gender"),
                     ("x.pgm,1,abc,", "face_score"),
                     ("x.pgm,1,4.0", "columns"),
                     ("x.pgm,1,4.0,zz", "second_face_score")]:
        path = tmp_path / "bad.csv"
        path.write_text(header + bad + "\n")
        with pytest.raises(ParseError, match=msg):
            load_gender_manifest(path)


# ---------------------------------------------------------------------------
# PGM


def test_pgm_decode_forced_values():
    data = b"P5\n2 2\n255\n" + bytes([0, 64, 128, 255])
    img = decode_image(data)
    np.testing.assert_array_equal(img, [[0, 64], [128, 255]])


def test_pgm_rejects_other_magic():
    with pytest.raises(DecodeError, match="P5"):
        decode_image(b"P6\n2 2\n255\n" + bytes(12))


def test_pgm_rejects_bad_maxval_and_truncation():
    with pytest.raises(DecodeError, match="maxval"):
        decode_image(b"P5\n2 2\n65535\n" + bytes(8))
    with pytest.raises(DecodeError, match="truncated"):
        decode_image(b"P5\n4 4\n255\n" + bytes(3))


def test_pgm_comment_support():
    data = b"P5\n# a comment\n2 1\n255\n" + bytes([9, 10])
    np.testing.assert_array_equal(decode_image(data), [[9, 10]])


def test_pgm_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, size=(7, 5), dtype=np.uint8)
    path = tmp_path / "x.pgm"
    write_pgm(path, img)
    np.testing.assert_array_equal(decode_image(path), img)


def test_pgm_stream_offsets():
    a = encode_pgm(np.arange(4, dtype=np.uint8).reshape(2, 2))
    b = encode_pgm(np.full((1, 3), 9, np.uint8))
    img1, off = parse_pgm(a + b)
    img2, _ = parse_pgm(a + b, off)
    np.testing.assert_array_equal(img1, [[0, 1], [2, 3]])
    np.testing.assert_array_equal(img2, [[9, 9, 9]])


def test_pgm_stream_is_incremental():
    import io
    from emogen.data import read_pgm_stream

    class Trickle(io.BytesIO):
        # deliver at most 5 bytes per read, like a slow pipe
        def read(self, n=-1):
            return super().read(5 if n is None or n < 0 else min(n, 5))

    frames = [np.arange(4, dtype=np.uint8).reshape(2, 2),
              np.full((3, 2), 7, np.uint8)]
    payload = b"".join(encode_pgm(f) for f in frames)
    got = list(read_pgm_stream(Trickle(payload)))
    assert len(got) == 2
    for want, have in zip(frames, got):
        np.testing.assert_array_equal(want, have)


def test_pgm_stream_rejects_partial_trailing_frame():
    import io
    from emogen.data import read_pgm_stream
    payload = encode_pgm(np.zeros((2, 2), np.uint8))[:-2]
    with pytest.raises(DecodeError):
        list(read_pgm_stream(io.BytesIO(payload)))


# ---------------------------------------------------------------------------
# resize + preprocess


def test_resize_identity_and_constant():
    rng = np.random.default_rng(1)
    img = rng.integers(0, 256, size=(5, 7)).astype(np.float64)
    np.testing.assert_allclose(resize_bilinear(img, 5, 7), img, atol=1e-6)
    const = np.full((3, 9), 42.0)
    np.testing.assert_allclose(resize_bilinear(const, 6, 4), np.full((6, 4), 42.0),
                               atol=1e-6)


def test_resize_ramp_hand_values():
    # 4x4 ramp f(y,x) = 4y + x sampled at source coords 0.5 and 2.5
    ramp = (4 * np.arange(4)[:, None] + np.arange(4)[None, :]).astype(np.float64)
    out = resize_bilinear(ramp, 2, 2)
    np.testing.assert_allclose(out, [[2.5, 4.5], [10.5, 12.5]], atol=1e-6)


def test_resize_stays_in_input_range():
    rng = np.random.default_rng(2)
    img = rng.integers(0, 256, size=(13, 9)).astype(np.float64)
    for shape in ((5, 5), (20, 30), (1, 1), (13, 9)):
        out = resize_bilinear(img, *shape)
        assert out.min() >= img.min() - 1e-6
        assert out.max() <= img.max() + 1e-6


def test_preprocess_contract():
    face = np.zeros((48, 48), np.uint8)
    face[0, 0] = 0
    face[0, 1] = 255
    t = preprocess(face)
    assert t.shape == (1, 1, 48, 48)
    assert t.data[0, 0, 0, 0] == -1.0
    assert t.data[0, 0, 0, 1] == 1.0
    mid = preprocess(np.full((48, 48), 127.5))
    np.testing.assert_allclose(mid.data, np.zeros((1, 1, 48, 48)), atol=1e-7)


def test_preprocess_invertible():
    rng = np.random.default_rng(3)
    face = rng.integers(0, 256, size=(48, 48)).astype(np.uint8)
    t = preprocess(face)
    recovered = (t.data[0, 0] / 2.0 + 0.5) * 255.0
    np.testing.assert_allclose(recovered, face, atol=1e-4)


def test_preprocess_not_idempotent_guarded_by_shape():
    face = np.random.default_rng(4).integers(0, 256, size=(48, 48))
    t = preprocess(face)
    with pytest.raises(ShapeError):
        preprocess(t.data)  # 4-D output cannot be fed back in
    # and values genuinely differ if someone reshapes around the guard
    twice = preprocess(t.data[0, 0])
    assert not np.allclose(twice.data, t.data)
