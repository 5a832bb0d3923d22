"""The remote planner/evaluator wire protocol.

Serves plan/evaluate over HTTP from a background thread (here backed by
the built-in rule-based components; a real deployment would answer from a
vision-language model) and drives a short play session through it.
"""

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer
from pathlib import Path

from keywarp.demo import save_demo_library
from keywarp.play import (NoPlan, RuleBasedEvaluator, SessionConfig,
                          rule_based_plan, run_session)
from keywarp.sim import default_layout, generate_demo_library
from keywarp.tasks import SymbolicState, builtin_tasks

TASKS = builtin_tasks()


class PlannerEvaluatorHandler(BaseHTTPRequestHandler):
    """Implements the documented protocol:

    request  {"kind": "plan", "symbolic_state": ..., "target_task": ...}
    reply    {"plan": [task ids]}
    request  {"kind": "evaluate", "pre": ..., "post": ..., "target_task": ...}
    reply    {"success": bool, "reason": str}
    """

    def do_POST(self):
        payload = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        if payload["kind"] == "plan":
            state = SymbolicState.from_dict(payload["symbolic_state"])
            try:
                reply = {"plan": rule_based_plan(state, payload["target_task"],
                                                 TASKS)}
            except NoPlan as e:
                reply = {"plan": [], "reason": str(e)}
        else:
            pre = SymbolicState.from_dict(payload["pre"])
            post = SymbolicState.from_dict(payload["post"])
            task = next(t for t in TASKS if t.id == payload["target_task"])
            ok = RuleBasedEvaluator().evaluate(None, pre, None, post, task)
            reply = {"success": ok, "reason": "symbolic rule check"}
        body = json.dumps(reply).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


server = HTTPServer(("127.0.0.1", 0), PlannerEvaluatorHandler)
threading.Thread(target=server.serve_forever, daemon=True).start()
url = f"http://127.0.0.1:{server.server_port}"
print(f"protocol server listening at {url}")

out = Path("remote_session_output")
summaries, sidecars = generate_demo_library(default_layout(), builtin_tasks(),
                                            n=5, seed=0)
save_demo_library(out / "demos", summaries, sidecars)

cfg = SessionConfig(demo_library=str(out / "demos"), iterations=20, seed=1,
                    planner_url=url, evaluator_url=url,
                    out_dir=str(out / "session"))
session = run_session(cfg)
print(f"remote-guided session: {sum(session.success_counts.values())}/"
      f"{session.iteration} successes")
server.shutdown()
