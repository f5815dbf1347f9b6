import json
import os
import pathlib
import shutil
import subprocess

import pytest

import objforge

ROOT = pathlib.Path(__file__).resolve().parents[2]
CORPUS = ROOT / "data" / "toy_corpus.jsonl"


def find_cli():
    env = os.environ.get("OBJFORGE_CLI")
    if env:
        return env
    built = ROOT / "build" / "tools" / "objforge"
    if built.exists():
        return str(built)
    return shutil.which("objforge")


CLI = find_cli()
needs_cli = pytest.mark.skipif(CLI is None, reason="objforge CLI not built")


@pytest.fixture
def vocab_file(tmp_path):
    letters = sorted({ch for line in CORPUS.read_text().splitlines()
                      for para in json.loads(line)["paragraphs"]
                      for s in para for ch in s if ch != " "})
    vocab = {
        "tokens": ["[PAD]", "[UNK]", "[MASK]", "[BOS]", "[EOS]"] + letters,
        "merges": [],
        "specials": {"pad": 0, "unk": 1, "mask": 2, "bos": 3, "eos": 4},
        "mode": "word-boundary",
    }
    path = tmp_path / "vocab.json"
    path.write_text(json.dumps(vocab))
    return path


def test_encode_decode_round_trip(vocab_file):
    with objforge.open_session(vocab=vocab_file) as s:
        text = "Za goloki ta beto ve. Le goloki go beto me."
        ids = s.encode(text)
        assert len(ids) == len(text.replace(" ", ""))
        assert s.decode(ids) == text


def test_corrupt_record_shape(vocab_file):
    s = objforge.open_session(vocab=vocab_file, seed=5)
    ids = list(s.encode("Za goloki ta beto ve."))
    rec = s.corrupt(ids, "mlm", counter=3)
    assert set(rec) >= {"ids", "labels", "mask"}
    assert len(rec["ids"]) == len(ids)
    assert rec == s.corrupt(ids, "mlm", counter=3)


def test_generate_and_close():
    s = objforge.open_session(corpus=CORPUS, seed=7)
    first = list(s.generate("ssp", 0, 2))
    assert len(first) == 10
    assert sum(r["y"] == "positive" for r in first) == 2
    s.close()
    with pytest.raises(objforge.ValidationError):
        list(s.generate("ssp", 0, 1))


def test_errors(vocab_file):
    s = objforge.open_session(vocab=vocab_file)
    with pytest.raises(objforge.ValidationError):
        s.corrupt([5, 6], "nope")
    with pytest.raises(objforge.ValidationError):
        objforge.open_session(corpus=ROOT / "missing.jsonl")


@needs_cli
@pytest.mark.parametrize("seed", [1, 7, 19])
def test_generate_matches_cli(tmp_path, seed):
    subprocess.run([CLI, "--seed", str(seed), "--out-dir", str(tmp_path), "gen", "ssp",
                    str(CORPUS), "--shards", "1"], check=True, capture_output=True)
    cli = (tmp_path / "ssp-00000.jsonl").read_text().splitlines()[:100]
    s = objforge.open_session(corpus=CORPUS, seed=seed)
    ours = [json.loads(x) for x in cli]
    got = []
    for rec in s.generate("ssp"):
        got.append(rec)
        if len(got) == len(ours):
            break
    assert got == ours


@needs_cli
def test_encode_and_corrupt_match_cli(tmp_path, vocab_file):
    lines = []
    for line in CORPUS.read_text().splitlines()[:20]:
        for para in json.loads(line)["paragraphs"]:
            lines.append(" ".join(para))
    text = tmp_path / "lines.txt"
    text.write_text("\n".join(lines) + "\n")
    out = subprocess.run([CLI, "tok", "encode", str(text), "--vocab", str(vocab_file)],
                         check=True, capture_output=True, text=True).stdout.splitlines()
    s = objforge.open_session(vocab=vocab_file, corpus=CORPUS, seed=4)
    assert [json.loads(x) for x in out] == [list(s.encode(x)) for x in lines]

    subprocess.run([CLI, "--seed", "4", "--out-dir", str(tmp_path), "corrupt", "rts", str(CORPUS),
                    "--vocab", str(vocab_file)], check=True, capture_output=True)
    cli = (tmp_path / "rts.jsonl").read_text().splitlines()
    paras = [" ".join(p) for line in CORPUS.read_text().splitlines()
             for p in json.loads(line)["paragraphs"]]
    for i in range(0, len(paras), 17):
        assert s.corrupt(s.encode(paras[i]), "rts", counter=i) == json.loads(cli[i])
