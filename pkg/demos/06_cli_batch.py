"""Drive the command line: print the default setup, run a batch, replay a file.

Equivalent shell session::

    pipefdi --print-default-config > leak.json
    pipefdi run configs/ --out-dir out --jobs 2
    pipefdi replay out/leak/telemetry.csv --config configs/leak.json --score
"""

import io
import json
import os
import tempfile
from contextlib import redirect_stdout

from pipefdi.cli import main

with tempfile.TemporaryDirectory() as tmp:
    configs = os.path.join(tmp, "configs")
    os.makedirs(configs)
    buf = io.StringIO()
    with redirect_stdout(buf):
        main(["--print-default-config"])
    leak = json.loads(buf.getvalue())
    leak["run"]["horizon"] = 160.0
    nominal = dict(leak, faults=[], name="nominal")
    for name, d in (("leak", leak), ("nominal", nominal)):
        with open(os.path.join(configs, f"{name}.json"), "w") as fh:
            json.dump(d, fh, indent=2)

    out = os.path.join(tmp, "out")
    code = main(["run", configs, "--out-dir", out, "--jobs", "2"])
    print(f"batch exit status {code}")
    print("files per run:", sorted(os.listdir(os.path.join(out, "leak"))))

    code = main(["replay", os.path.join(out, "leak", "telemetry.csv"),
                 "--config", os.path.join(configs, "leak.json"),
                 "--out-dir", os.path.join(tmp, "replay"), "--score"])
    print(f"replay exit status {code}")
