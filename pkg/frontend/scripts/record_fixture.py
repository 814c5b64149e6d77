"""Record a real substitution-flow session into a console test fixture.

Drives the HTTP service in-process (no sockets) through the missing-sugar
scenario and captures everything the console would see: the inventory
snapshot, the full event log, and the final session view.

Run from the repository root:  python3 frontend/scripts/record_fixture.py
"""

import json
from pathlib import Path

from fastapi.testclient import TestClient

from mixcell.config import AppConfig
from mixcell.demo import demo_detection_document, demo_index
from mixcell.service import create_app

OUT = Path(__file__).resolve().parent.parent / "test" / "fixtures" / "session.json"


def main():
    app = create_app(AppConfig(), demo_index())
    with TestClient(app) as client:
        inventory = client.put(
            "/v1/inventory", json=json.loads(demo_detection_document(exclude=("sugar",)))
        ).json()
        session_id = client.post("/v1/orders", json={"text": "make me a daiquiri"}).json()[
            "session_id"
        ]
        view = client.get(f"/v1/sessions/{session_id}").json()
        assert view["state"] == "AwaitingUser", view["state"]
        prompt = view["prompts"][0]
        client.post(
            f"/v1/sessions/{session_id}/answers",
            json={"anomaly_id": prompt["anomaly_id"], "choice": "honey"},
        )
        final_view = client.get(f"/v1/sessions/{session_id}").json()
        assert final_view["state"] == "Served", final_view["state"]
        events = [
            json.loads(line)
            for line in client.get(
                f"/v1/sessions/{session_id}/events", params={"since": 0}
            ).text.splitlines()
        ]

    answer_seq = next(e["seq"] for e in events if e["kind"] == "answer")
    fixture = {
        "session_id": session_id,
        "inventory": inventory,
        "events": events,
        "final_view": final_view,
        "answer_seq": answer_seq,
        "expected_prompt_text": prompt["text"],
        "expected_final_mass_g": final_view["report"]["traces"][-1]["outcome"]["final_mass_g"],
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(fixture, indent=2) + "\n")
    print(f"wrote {OUT} ({len(events)} events, answer at seq {answer_seq})")


if __name__ == "__main__":
    main()
