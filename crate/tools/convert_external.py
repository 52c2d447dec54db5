#!/usr/bin/env python3
"""Convert an external study's results into arenabench interchange CSV.

Two input layouts are understood:

  wide  one row per participant, one column per task holding 1/0,
        true/false or pass/fail. Task columns are picked by --task-pattern
        and renamed with --task-map or the built-in "L.T" -> lLL_taskT rule.
  long  one row per attempt with participant, task and outcome columns.

Output columns: participant_id,population,task_id,passed,level,trial_index.
Load the result with `arenabench report --baseline OUT.csv`.
"""

import argparse
import csv
import re
import sys

TRUE = {"1", "true", "t", "yes", "y", "pass", "passed"}
FALSE = {"0", "false", "f", "no", "n", "fail", "failed"}
POPULATIONS = ("child", "competition", "llm", "baseline")


def task_id(name, mapping):
    if name in mapping:
        return mapping[name]
    if re.fullmatch(r"l\d{2}_task\d+", name):
        return name
    m = re.fullmatch(r"\D*?(\d{1,2})[._-](\d+)", name.strip())
    if not m:
        raise ValueError(f"cannot map task column {name!r}; add it to --task-map")
    return f"l{int(m.group(1)):02d}_task{int(m.group(2))}"


def outcome(value, where):
    v = value.strip().lower()
    if v in TRUE:
        return True
    if v in FALSE:
        return False
    if v == "":
        return None
    raise ValueError(f"{where}: unrecognised outcome {value!r}")


def load_map(path):
    if not path:
        return {}
    with open(path, newline="") as f:
        return {row[0]: row[1] for row in csv.reader(f) if len(row) >= 2}


def wide_rows(reader, args, mapping):
    pattern = re.compile(args.task_pattern)
    tasks = [c for c in reader.fieldnames if c != args.participant and pattern.fullmatch(c)]
    if not tasks:
        raise ValueError("no task columns match --task-pattern")
    for n, row in enumerate(reader, start=2):
        pid = row[args.participant].strip()
        for col in tasks:
            passed = outcome(row[col], f"row {n}, column {col}")
            if passed is not None:
                yield pid, task_id(col, mapping), passed, 0


def long_rows(reader, args, mapping):
    seen = {}
    for n, row in enumerate(reader, start=2):
        pid = row[args.participant].strip()
        tid = task_id(row[args.task].strip(), mapping)
        passed = outcome(row[args.outcome], f"row {n}")
        if passed is None:
            continue
        trial = seen.get((pid, tid), 0)
        seen[(pid, tid)] = trial + 1
        yield pid, tid, passed, trial


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("input")
    p.add_argument("-o", "--out", default="-")
    p.add_argument("--layout", choices=("wide", "long"), default="wide")
    p.add_argument("--population", choices=POPULATIONS, default="child")
    p.add_argument("--participant", default="participant", help="participant id column")
    p.add_argument("--prefix", default="", help="prepended to every participant id")
    p.add_argument("--task", default="task", help="task column (long layout)")
    p.add_argument("--outcome", default="passed", help="outcome column (long layout)")
    p.add_argument("--task-pattern", default=r"\D*\d{1,2}[._-]\d+|l\d{2}_task\d+",
                   help="regex selecting task columns (wide layout)")
    p.add_argument("--task-map", help="two-column CSV: external task name, task id")
    args = p.parse_args(argv)

    mapping = load_map(args.task_map)
    with open(args.input, newline="") as f:
        reader = csv.DictReader(f)
        rows = wide_rows if args.layout == "wide" else long_rows
        try:
            out = list(rows(reader, args, mapping))
        except (ValueError, KeyError) as e:
            sys.exit(f"{args.input}: {e}")

    dst = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(dst, lineterminator="\n")
    w.writerow(["participant_id", "population", "task_id", "passed", "level", "trial_index"])
    for pid, tid, passed, trial in out:
        w.writerow([args.prefix + pid, args.population, tid, str(passed).lower(), int(tid[1:3]), trial])
    if dst is not sys.stdout:
        dst.close()


if __name__ == "__main__":
    main()
