# Copyright 2026 The Curbside Authors
# SPDX-License-Identifier: Apache-2.0

"""Drives the curb CLI end to end against mock judge backends."""

import json
import math
import pathlib
import struct
import subprocess
import sys
import tempfile

CATALOG = pathlib.Path(__file__).resolve().parent.parent / "data" / "default_catalog.json"
WORDS = ["Uninhabitable", "Poor", "Adequate", "Good", "Excellent"]


def png(width=640, height=480):
    return b"\x89PNG\r\n\x1a\n" + b"\x00\x00\x00\x0dIHDR" + struct.pack(">II", width, height) + b"\x08\x02\x00\x00\x00" + b"\x00" * 4


def ranks(xs):
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    out = [0.0] * len(xs)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and xs[order[j + 1]] == xs[order[i]]:
            j += 1
        for k in range(i, j + 1):
            out[order[k]] = (i + j) / 2 + 1
        i = j + 1
    return out


def pearson(x, y):
    mx, my = sum(x) / len(x), sum(y) / len(y)
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    return sxy / math.sqrt(sum((a - mx) ** 2 for a in x) * sum((b - my) ** 2 for b in y))


class Cli:
    def __init__(self, exe, config):
        self.exe, self.config = exe, config
        self.failures = []

    def run(self, name, args, expect=0, config=True):
        cmd = [self.exe, *args] + (["--config", str(self.config)] if config else [])
        p = subprocess.run(cmd, capture_output=True, text=True, timeout=120)
        ok = p.returncode == expect
        print(f"{'ok  ' if ok else 'FAIL'} {name}: exit {p.returncode}")
        if not ok:
            self.failures.append(name)
            print(p.stdout, p.stderr, sep="\n", file=sys.stderr)
        return p

    def json(self, name, args, expect=0):
        p = self.run(name, args, expect)
        try:
            return json.loads(p.stdout)
        except json.JSONDecodeError:
            self.failures.append(f"{name}: stdout is not JSON")
            return {}

    def check(self, name, cond):
        print(f"{'ok  ' if cond else 'FAIL'} {name}")
        if not cond:
            self.failures.append(name)


def main(exe):
    catalog = json.loads(CATALOG.read_text())
    # Option 1 for every attribute, listed in catalog order.
    qa_answer = "\n".join(f"- {a['display_name']}: {a['options'][1]['label']}" for a in catalog["attributes"])
    teacher = {f"prop-{i:03d}": 1 + (i * 3) % 5 for i in range(6)}
    human = {f"prop-{i:03d}": [1 + i % 5, 1 + (i + 2) % 5] for i in range(6)}

    with tempfile.TemporaryDirectory(prefix="curb-cli-") as tmp:
        root = pathlib.Path(tmp)
        (root / "images").mkdir()
        corpus = []
        for i, image in enumerate(teacher):
            (root / "images" / f"{image}.png").write_bytes(png())
            corpus.append({"image_id": image, "image_source": f"images/{image}.png", "city": "Springfield",
                           "state": "IL", "latitude": 39.78 + i * 0.001, "longitude": -89.65,
                           "address": f"{100 + i} Elm St"})
        (root / "corpus.jsonl").write_text("".join(json.dumps(p) + "\n" for p in corpus))
        (root / "ratings.csv").write_text(
            "image_id,rater_id,rating\n" +
            "".join(f"{img},r{k},{v}\n" for img, vs in human.items() for k, v in enumerate(vs)))
        config = root / "config.json"
        mock = {"kind": "mock", "max_concurrency": 2, "requests_per_minute": 100000,
                "retry": {"max_attempts": 1, "backoff_base_s": 0}}
        config.write_text(json.dumps({
            "store": "curb.db",
            "image_root": ".",
            "backends": [
                dict(mock, model_id="mock-rater",
                     mock={"by_image": {k: WORDS[v - 1] for k, v in teacher.items()}, "fallback": "Adequate"}),
                dict(mock, model_id="mock-qa", mock={"fallback": qa_answer}),
            ],
        }))

        cli = Cli(exe, config)
        cli.run("help", ["--help"], config=False)
        cli.run("missing subcommand is a usage error", [], expect=2, config=False)

        ingest = cli.json("ingest corpus and ratings",
                          ["ingest", "--corpus", str(root / "corpus.jsonl"), "--ratings", str(root / "ratings.csv")])
        cli.check("ingest reports its sources", bool(ingest))

        rate = cli.json("rate single-word", ["rate", "--model", "mock-rater", "--format", "single-word"])
        cli.check("rate judged every image", rate.get("succeeded") == 6)
        again = cli.json("rate resumes", ["rate", "--model", "mock-rater", "--format", "single-word"])
        cli.check("resume skips completed work", again.get("skipped") == 6 and again.get("backend_calls") == 0)

        qa = cli.json("qa three trials", ["qa", "--model", "mock-qa", "--trials", "3", "--seed", "4"])
        cli.check("qa judged every trial", qa.get("succeeded") == 18 and qa.get("judgments_written") == 18 * 12)

        srcc = cli.json("metrics srcc",
                        ["metrics", "srcc", "--pred", "model:mock-rater", "--run-set", "condition:single-word"])
        images = sorted(teacher)
        x = [teacher[i] for i in images]
        y = [sum(human[i]) / len(human[i]) for i in images]
        want = pearson(ranks(x), ranks(y))
        cli.check("srcc matches the oracle", abs(srcc.get("value", 99) - want) < 1e-9)
        stability = cli.json("metrics stability", ["metrics", "stability"])
        cli.check("constant judge is perfectly stable", stability.get("value") == 1.0)
        md = cli.run("metrics markdown", ["metrics", "distribution", "--attribute", "safety", "--markdown"])
        cli.check("markdown table printed", "|" in md.stdout)
        cli.run("unknown metric fails", ["metrics", "kappa"], expect=2)

        report = root / "report.md"
        cli.run("report", ["report", "--image", "prop-000", "--out", str(report)])
        cli.check("report names every attribute",
                  report.exists() and all(a["display_name"] in report.read_text() for a in catalog["attributes"]))
        cli.run("report for unknown image fails", ["report", "--image", "ghost"], expect=2)

        manifest = root / "distill.csv"
        cli.run("distill-export",
                ["distill-export", "--corpus", str(root / "corpus.jsonl"), "--model", "mock-rater", "--out",
                 str(manifest)])
        rows = manifest.read_text().splitlines() if manifest.exists() else []
        cli.check("manifest has a header and one row per image", len(rows) == 7 and rows[0].startswith("image_id,"))

        preds = root / "preds.csv"
        preds.write_text("image_id,prediction\n" + "".join(f"{k},{v + 0.1 * (i % 3)}\n"
                                                           for i, (k, v) in enumerate(sorted(teacher.items()))))
        score = cli.json("score-predictions", ["score-predictions", "--pred", str(preds)])
        cli.check("scores pair every prediction", score.get("n") == 6)
        bad = root / "bad.csv"
        bad.write_text("image_id,prediction\nprop-000,not-a-number\n")
        cli.run("malformed predictions fail", ["score-predictions", "--pred", str(bad)], expect=2)

    print(f"{len(cli.failures)} failures")
    return 1 if cli.failures else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1]))
