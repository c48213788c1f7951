"""End-to-end checks of the parcalm command line: exit codes and JSON fields."""

import json
import os
import subprocess
import sys
import tempfile

EXE = sys.argv[1]
PROBLEMS = sys.argv[2]
failures = []


def run(*args):
    proc = subprocess.run([EXE, *args], capture_output=True, text=True, timeout=300)
    doc = None
    if proc.stdout.strip():
        doc = json.loads(proc.stdout)
    return proc.returncode, doc, proc.stderr


def check(name, cond, detail=""):
    print(("ok   " if cond else "FAIL ") + name + (f" ({detail})" if detail and not cond else ""))
    if not cond:
        failures.append(name)


def path(name):
    return os.path.join(PROBLEMS, name)


code, doc, _ = run("classify", "--problem", "builtin:example-js", "--x", "0", "--y", "0,0")
check("classify example exit 0", code == 0, code)
check("classify example type", doc["result"]["type"] == "4" and doc["result"]["case"] == "I", doc["result"]["type"])
check("classify envelope", doc["command"] == "classify" and doc["status"] == "ok")

code, doc, _ = run("solve", "--problem", path("quadratic.blp"))
check("solve quadratic exit 0", code == 0, code)
res = doc["result"]
check("solve quadratic optimum", abs(res["x"] - 0.5) < 1e-6 and abs(res["y"][0] - 0.5) < 1e-6
      and abs(res["F"] - 0.5) < 1e-6, res)

code, doc, _ = run("solve-lower", "--problem", "builtin:example-js", "--x", "0.25")
mins = doc["result"]["minimizers"]
check("solve-lower S(0.25)", code == 0 and len(mins) == 1 and abs(mins[0][0] - 0.5) < 1e-6 and abs(mins[0][1]) < 1e-6,
      mins)

code, doc, _ = run("check-stationarity", "--problem", "builtin:example-js", "--x", "0", "--y", "0,0")
r = doc["result"]
check("stationarity verdicts", r["direct"]["verdict"] == "satisfied" and r["implicit"]["verdict"] == "satisfied"
      and r["agreement"], r["direct"]["verdict"])
check("stationarity certificate", r["certificate_residual"] <= 1e-10, r.get("certificate_residual"))

code, doc, _ = run("mpcc-licq", "--problem", "builtin:duplicate-constraint", "--x", "0.5", "--y", "0.5",
                   "--u", "0.5,0.5")
check("mpcc-licq duplicate rank deficient", code == 0 and not doc["result"]["full_column_rank"])

with tempfile.TemporaryDirectory() as tmp:
    out = os.path.join(tmp, "trace.csv")
    code, doc, _ = run("trace", "--problem", "builtin:type2-kink", "--x", "1", "--y", "1", "--to", "-1",
                       "--out", out)
    ev = doc["result"]["events"]
    check("trace kink event", code == 0 and ev and ev[0]["kind"] == "multiplier-zero" and abs(ev[0]["x"]) < 1e-6, ev)
    with open(out) as fh:
        check("trace csv header", fh.readline().startswith("x,y1,u1"))

    out = os.path.join(tmp, "peb.csv")
    code, doc, _ = run("verify-peb", "--problem", "builtin:example-js", "--x", "0", "--y", "0,0", "--uwsm",
                       "--condition", "f", "--samples", "100", "--out", out)
    check("uwsm over f unbounded", doc["result"]["verdict"] == "unbounded-suspect", doc["result"]["verdict"])
    with open(out) as fh:
        check("peb csv header", fh.readline().strip() == "x,y1,y2,v,numerator,ratio")

code, doc, _ = run("verify-peb", "--problem", "builtin:example-js", "--x", "0", "--y", "0,0", "--fj-min",
                   "--radius", "0.2", "--samples", "100")
check("fj-min distance", code == 0 and doc["result"]["max_distance"] <= 1e-6, doc["result"])

code, doc, _ = run("verify-calmness", "--problem", "builtin:double-well", "--x", "0", "--y", "-1", "--mu", "0")
check("calmness fails at mu 0", code == 0 and not doc["result"]["holds"] and doc["result"]["witness"]["value"] < 0)

code, doc, _ = run("value-function", "--problem", "builtin:quadratic", "--from", "0", "--to", "1", "--count", "5")
rows = doc["result"]["rows"]
check("value-function rows", code == 0 and len(rows) == 5 and all(abs(r["value"]) < 1e-9 for r in rows))

# Error paths.
code, doc, err = run("classify", "--problem", path("missing.blp"), "--x", "0", "--y", "0")
check("missing file exits 2", code == 2 and doc["status"] == "error" and err, code)
code, doc, err = run("classify", "--problem", path("bad_syntax.blp"), "--x", "0", "--y", "0")
check("syntax error exits 2", code == 2 and "offset 4" in doc["message"], doc and doc.get("message"))
code, _, _ = run("classify", "--problem", "builtin:example-js", "--x", "0", "--y", "0,0", "--bogus")
check("unknown flag exits 2", code == 2, code)
code, doc, _ = run("classify", "--problem", "builtin:example-js", "--x", "0", "--y", "0")
check("wrong dimension exits 2", code == 2, code)
code, doc, _ = run("classify", "--problem", "builtin:example-js", "--x", "0", "--y", "1,1")
check("infeasible point exits 2", code == 2, code)
code, doc, _ = run("classify", "--problem", path("log_domain.blp"), "--x", "0", "--y", "-0.5", "--no-simplicity")
check("domain error exits 3", code == 3 and doc["error"] == "domain" and "log(y1)" in doc["message"], code)

code, doc, err = run("corpus", "--corrupt-first")
check("corrupted corpus exits 1", code == 1 and doc["result"]["failures"] == 1 and "example-js" in err, code)
code, doc, _ = run("corpus", "--tol-rank", "1e-2")
bad = [o["expectation"] for o in doc["result"]["outcomes"] if not o["passed"]]
check("coarse rank tolerance fails the fixture", code == 1 and any("x=1e-06" in b for b in bad), bad)

print(f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
