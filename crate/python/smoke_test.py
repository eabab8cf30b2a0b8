"""Smoke test for the medshare Python bindings.

Run directly (``python python/smoke_test.py``) or under pytest.
"""

import json
import os
import tempfile

import medshare

SECRET = b"0123456789abcdef0123456789abcdef"


def test_generate_and_round_trip():
    ds = medshare.Dataset.generate(seed=42)
    counts = ds.row_counts()
    assert counts["patient"] == 1881
    assert counts["prescriptmed"] == 8801
    with tempfile.TemporaryDirectory() as d:
        ds.save(d)
        again = medshare.Dataset.load(d)
        assert again.row_counts() == counts


def test_query_formats_and_errors():
    ds = medshare.Dataset.generate(seed=42)
    window = {"start": "2010-01-01", "end": "2010-12-31"}
    rows = json.loads(ds.query("q3_age_profile", window))
    assert len(rows) == 1 and len(rows[0]) == 4
    xml = ds.query("q1_exam_by_country", window, format="xml")
    assert xml.startswith('<?xml version="1.0" encoding="utf-8"?>\n<dataset>')

    try:
        ds.query("q1_exam_by_country", {"start": "2010-01-01'--", "end": "2010-12-31"})
    except medshare.MedshareError as e:
        assert e.args[0] == "input_blocked"
    else:
        raise AssertionError("injection accepted")

    try:
        ds.query("q4_hepb_susceptible_by_gender", role="organization_a")
    except medshare.MedshareError as e:
        assert e.args[0] == "query_denied"
    else:
        raise AssertionError("ungranted query ran")


def test_guard():
    g = medshare.Guard()
    assert g.accepts("Abilify")
    assert g.screen("Tom Baker; DROP") == "injection"
    assert g.screen("patient name") == "deidentification"


def test_tokens_and_grants():
    rbac = medshare.Rbac()
    rbac.set_digest_iterations(1000)
    rbac.create_user("alice", "s3cret", ["administrator"])
    assert len(rbac.permitted_queries(["administrator"])) == 8
    assert rbac.permitted_queries(["organization_a"]) == ["q2_top5_diagnoses", "q3_age_profile"]
    token = medshare.issue_token(rbac, "alice", "s3cret", 1000, SECRET, ttl=900)
    claims = medshare.verify_token(token, 1001, SECRET)
    assert claims["sub"] == "alice" and claims["exp"] == 1900
    try:
        medshare.verify_token(token, 1900, SECRET)
    except medshare.MedshareError as e:
        assert e.args[0] == "expired_token"
    else:
        raise AssertionError("expired token accepted")


def test_audit_chain():
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "audit.log")
        log = medshare.AuditLog(path)
        for i in range(3):
            assert log.append("alice", "query_execute", 1000 + i, detail="q4_hepb_susceptible_by_gender") == i + 1
        assert medshare.verify_chain(path) is None
        data = bytearray(open(path, "rb").read())
        data[10] ^= 1
        open(path, "wb").write(bytes(data))
        assert medshare.verify_chain(path) == 1


def test_catalog():
    ids = [q["query_id"] for q in medshare.canonical_queries()]
    assert len(ids) == 8 and ids[0] == "q1_exam_by_country"


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print("ok", name)
