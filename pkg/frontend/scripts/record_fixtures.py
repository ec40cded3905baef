"""Record real server responses into frontend/fixtures/.

Boots the service in-process (demo dataset, pinned clock) and captures
the exact JSON the console will receive, including error shapes.  Rerun
after changing any server payload.
"""

import json
import os
import sys
import time
import urllib.error
import urllib.request

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "..", "tests"))
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", ".."))

from polyfed import nl                                    # noqa: E402
from polyfed.config import Config                         # noqa: E402
from polyfed.demo import DEMO_TODAY, seed_demo            # noqa: E402
from polyfed.errors import UnknownSession                 # noqa: E402
from polyfed.server import error_payload, start_background  # noqa: E402
from polyfed.service import PolyfedService                # noqa: E402

OUT = os.path.join(os.path.dirname(__file__), "..", "fixtures")


def fetch(base, method, path, body=None, raw=None):
    data = raw if raw is not None else (
        json.dumps(body).encode() if body is not None else None)
    request = urllib.request.Request(base + path, data=data, method=method,
                                     headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(request) as response:
            return response.status, json.loads(response.read().decode())
    except urllib.error.HTTPError as error:
        return error.code, json.loads(error.read().decode())


def save(name, status, payload):
    with open(os.path.join(OUT, name), "w", encoding="utf-8") as handle:
        json.dump({"status": status, "body": payload}, handle, indent=2,
                  sort_keys=False)
        handle.write("\n")
    print(f"recorded {name} ({status})")


class _AlwaysBadTranslator:
    def translate(self, envelope, intent, attempt=1):
        return nl.GeneratedQuery("sql", "SELECT nope FROM nowhere", attempt, "llm")


def main():
    os.makedirs(OUT, exist_ok=True)
    service = PolyfedService(Config(values={"mode": "extended",
                                            "validator.mode": "strict"}),
                             clock=lambda: DEMO_TODAY)
    seed_demo(service)
    httpd, _ = start_background(service, port=0)
    base = f"http://127.0.0.1:{httpd.server_address[1]}"
    try:
        status, session = fetch(base, "POST", "/session", body={})
        sid = session["session_id"]

        status, body = fetch(base, "POST", "/query", body={
            "session_id": sid,
            "question": "What were the top 5 products by sales last month?"})
        save("query_success.json", status, body)

        status, body = fetch(base, "POST", "/query", body={
            "session_id": sid, "question": "and for electronics only?"})
        save("query_followup.json", status, body)

        status, body = fetch(base, "POST", "/query", body={
            "session_id": sid, "question": "colorless green ideas"})
        save("query_not_translatable.json", status, body)

        status, body = fetch(base, "POST", "/query", raw=b"{broken")
        save("query_malformed.json", status, body)

        original = service.translator
        service.translator = lambda: _AlwaysBadTranslator()
        status, body = fetch(base, "POST", "/query", body={
            "session_id": sid, "question": "how many purchases"})
        save("query_refinement_exhausted.json", status, body)
        service.translator = original

        service.federator.plan_timeout_ms = 20
        service.federator.delay_hook = lambda index: time.sleep(0.5)
        status, body = fetch(base, "POST", "/query", body={
            "session_id": sid, "question": "how many purchases"})
        save("query_timeout.json", status, body)
        service.federator.delay_hook = None
        service.federator.plan_timeout_ms = 30000

        lock = service.sessions.acquire(sid)
        status, body = fetch(base, "POST", "/query", body={
            "session_id": sid, "question": "how many purchases"})
        save("query_busy.json", status, body)
        lock.release()

        # The one documented code /query cannot emit live (sessions are
        # auto-created): serialize it through the production error encoder.
        save("query_unknown_session.json", 404,
             error_payload(UnknownSession("no session 's-gone'")))

        status, body = fetch(base, "GET", "/schema")
        save("schema.json", status, body)

        empty = PolyfedService(Config(values={}))
        httpd2, _ = start_background(empty, port=0)
        base2 = f"http://127.0.0.1:{httpd2.server_address[1]}"
        status, body = fetch(base2, "GET", "/schema")
        save("schema_empty.json", status, body)
        httpd2.shutdown()
    finally:
        httpd.shutdown()


if __name__ == "__main__":
    main()
