#!/usr/bin/env python3
"""Regenerates the binary test fixtures. scipy writes the .mat files so the
TypeScript reader is tested against an independent writer.

Run from this directory: python3 gen_fixtures.py
"""
import numpy as np
from scipy.io import savemat


def cell(strings):
    return np.array(strings, dtype=object).reshape(1, -1)


def row(values):
    return np.array(values, dtype=np.float64).reshape(1, -1)


savemat("imdb_meta.mat", {"imdb": {
    "full_path": cell(["01/nm01_rm1_1968-2008.png",
                       "02/nm02_rm2_1972-2010.png",
                       "03/nm03_rm1_1955-1990.png",
                       "04/nm04_rm4_1980-2011.png",
                       "05/nm05_rm5_1960-2007.png"]),
    "gender": row([1, 0, 1, 1, 0]),
    "face_score": row([4.5, 2.25, -np.inf, 3.0, 5.125]),
    "second_face_score": row([np.nan, np.nan, np.nan, 1.5, np.nan]),
}}, do_compression=False)

savemat("imdb_meta_missing.mat", {"imdb": {
    "full_path": cell(["a.png", "b.png", "c.png"]),
    "gender": row([np.nan, 1, 0]),
    "face_score": row([6.0, 4.0, 3.5]),
    "second_face_score": row([np.nan, np.nan, np.nan]),
}}, do_compression=False)


def pattern():
    p = np.full((24, 24), 128, np.uint8)
    p[2:12, 2:12] = 28
    p[2:12, 12:22] = 228
    p[12:22, 2:12] = 228
    p[12:22, 12:22] = 28
    p[:2, :] = 0
    p[22:, :] = 0
    p[:, :2] = 0
    p[:, 22:] = 0
    return p


portrait = np.full((64, 64), 128, np.uint8)
portrait[18:42, 20:44] = pattern()
with open("portrait.pgm", "wb") as fh:
    fh.write(b"P5\n64 64\n255\n" + portrait.tobytes())

print("fixtures written")
