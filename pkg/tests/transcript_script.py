"""The scripted exchange behind the committed golden transcript.

Run as a module to (re)generate fixtures/golden_transcript.jsonl; the
service contract test replays the same script and compares byte-for-byte.
"""

import json
from pathlib import Path

FIXTURE = Path(__file__).resolve().parent.parent / "fixtures" / \
    "golden_transcript.jsonl"

SCRIPT = [
    {"type": "create_session", "scenario_name": "nominal"},
    {"type": "status", "session": "s1"},
    {"type": "step", "session": "s1", "n": 12},
    {"type": "frames", "session": "s1", "from_seq": 9, "to_seq": 12},
    {"type": "set_input", "session": "s1", "which": "Q_c", "value": 26.0},
    {"type": "step", "session": "s1", "n": 3},
    {"type": "frames", "session": "s1", "from_seq": 12, "to_seq": 15},
    {"type": "what_if", "session": "s1", "horizon": 4,
     "schedule": [{"from_step": 0, "Q_c_sccm": 29.0}]},
    {"type": "what_if", "session": "s1", "horizon": 4,
     "schedule": [{"from_step": 0, "Q_c_sccm": 29.0}]},
    {"type": "set_input", "session": "s1", "which": "Q_s", "value": 99.0},
    {"type": "probe", "session": "s1"},
    {"type": "export", "session": "s1"},
    {"type": "status", "session": "s1"},
]


def record(server) -> list:
    """Run the script against a TwinServer; returns exchange dicts."""
    exchanges = []
    for request in SCRIPT:
        response = server.handle_request(request)
        exchanges.append({"request": request, "response": response})
    return exchanges


def to_jsonl(exchanges) -> str:
    return "".join(json.dumps(e, sort_keys=True, separators=(",", ":"))
                   + "\n" for e in exchanges)


def main():
    from ajtwin.params import load_parameters
    from ajtwin.service.server import TwinServer
    server = TwinServer(params=load_parameters())
    try:
        text = to_jsonl(record(server))
    finally:
        server.stop()
    FIXTURE.parent.mkdir(exist_ok=True)
    FIXTURE.write_text(text)
    print(f"wrote {FIXTURE} ({len(text.splitlines())} exchanges)")


if __name__ == "__main__":
    main()
