"""Regenerate frontend/test/example-fixtures.json from the live service code.

Run after changing bundled examples or library templates:

    python3 scripts/capture_fixtures.py
"""
import json
from pathlib import Path

from fastapi.testclient import TestClient

from llib.service.app import ServiceConfig, create_app


def main() -> None:
    client = TestClient(create_app(ServiceConfig()))
    fixtures = []
    for example in client.get("/v1/examples").json():
        resp = client.post("/v1/execute", json={
            "program": example["program"],
            "relations": example["relations"]})
        resp.raise_for_status()
        fixtures.append({"example": example, "response": resp.json()})
    out = Path(__file__).resolve().parent.parent / "frontend" / "test" / "example-fixtures.json"
    out.write_text(json.dumps(fixtures, indent=2) + "\n")
    print(f"wrote {len(fixtures)} fixtures to {out}")


if __name__ == "__main__":
    main()
