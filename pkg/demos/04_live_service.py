"""Driving a live session over HTTP, end to end, with only the stdlib client.

Starts the real service in a background thread, creates a session, performs
the whole 12-stage assembly as an operator surrogate, watches the push
channel, and downloads the recorded timeline.

Run:  python demos/04_live_service.py
"""

import json
import threading
import time
import urllib.request

import uvicorn

from stagewatch import reference_plan
from stagewatch.service import create_app

# ---------------------------------------------------------------------------
# Boot the service on an ephemeral port.
# ---------------------------------------------------------------------------
server = uvicorn.Server(uvicorn.Config(create_app([reference_plan()]),
                                       host="127.0.0.1", port=0, log_level="warning"))
thread = threading.Thread(target=server.run, daemon=True)
thread.start()
while not server.started:
    time.sleep(0.02)
port = server.servers[0].sockets[0].getsockname()[1]
base = f"http://127.0.0.1:{port}"
print(f"service up at {base}")


def post(path, body):
    request = urllib.request.Request(base + path, data=json.dumps(body).encode(),
                                     headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(request) as response:
        return json.loads(response.read())


def get(path):
    with urllib.request.urlopen(base + path) as response:
        return response.read().decode()


# ---------------------------------------------------------------------------
# Create a session and subscribe to the push channel in the background.
# ---------------------------------------------------------------------------
session = post("/sessions", {"plan_id": "gearbox-12"})
sid = session["session_id"]
print(f"session {sid} at stage {session['current_stage_index']}: "
      f"{session['instruction']!r}")

pushed = []


def watch_stream():
    with urllib.request.urlopen(f"{base}/sessions/{sid}/stream?after=-1") as stream:
        for raw in stream:
            line = raw.decode().strip()
            if line.startswith("data: "):
                pushed.append(json.loads(line[6:]))


watcher = threading.Thread(target=watch_stream, daemon=True)
watcher.start()

# ---------------------------------------------------------------------------
# Perform the assembly. Each action becomes one synthetic frame pair.
# ---------------------------------------------------------------------------
script = [
    {"kind": "place_part", "part": "p_base", "zone": "z_assembly"},
    {"kind": "show_connection", "connection": "c_base_fixture",
     "leading_prob": 0.9, "aux_prob": 0.8},
    {"kind": "place_part", "part": "p_axle", "zone": "z_assembly"},
    {"kind": "show_connection", "connection": "c_axle_base",
     "leading_prob": 0.9, "aux_prob": 0.8},
    {"kind": "place_part", "part": "p_gear_small", "zone": "z_staging_left"},
    {"kind": "show_connection", "connection": "c_gear_small_axle",
     "leading_prob": 0.9, "aux_prob": 0.8},
    {"kind": "place_part", "part": "p_gear_large", "zone": "z_assembly"},
    {"kind": "show_connection", "connection": "c_gear_mesh",
     "leading_prob": 0.9, "aux_prob": 0.8},
    {"kind": "place_part", "part": "p_cover", "zone": "z_assembly"},
    {"kind": "show_connection", "connection": "c_cover_base",
     "leading_prob": 0.9, "aux_prob": 0.8},
    {"kind": "place_part", "part": "p_bolt", "zone": "z_assembly"},
    {"kind": "place_part", "part": "p_bolt", "zone": "z_assembly"},
    {"kind": "show_connection", "connection": "c_bolts_tight",
     "leading_prob": 0.9, "aux_prob": 0.8},
]
for i, action in enumerate(script):
    reply = post(f"/sessions/{sid}/events",
                 {"timestamp_ms": (i + 1) * 1500, "action": action})
    for message in reply["messages"]:
        print(f"  {message['type']:20s} {message['payload']}")

snapshot = json.loads(get(f"/sessions/{sid}"))
print(f"\ncompleted: {snapshot['completed']}")

# ---------------------------------------------------------------------------
# The push channel saw the same story, in order, without duplicates.
# ---------------------------------------------------------------------------
watcher.join(timeout=5)
kinds = [e["kind"] for e in pushed]
print(f"push channel delivered {len(pushed)} events "
      f"({kinds.count('message')} messages, {kinds.count('transition')} transitions, "
      f"{kinds.count('state')} snapshots)")

# ---------------------------------------------------------------------------
# The recorded timeline, in the same CSV format the evaluator consumes.
# ---------------------------------------------------------------------------
print("\nrecorded timeline:")
print(get(f"/sessions/{sid}/timeline"))

server.should_exit = True
thread.join(timeout=5)
