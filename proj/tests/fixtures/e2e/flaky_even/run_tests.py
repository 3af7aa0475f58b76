import os
import sys

sys.path.insert(0, os.getcwd())
import tests

skip = set(filter(None, os.environ.get("MENDKIT_SKIP_TESTS", "").split(",")))
for name in sorted(n for n in dir(tests) if n.startswith("test_")):
    if name in skip:
        continue
    try:
        ok = getattr(tests, name)()
    except Exception:
        print(name, "error")
    else:
        print(name, "pass" if ok else "fail")
