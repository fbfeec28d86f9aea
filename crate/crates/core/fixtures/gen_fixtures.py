#!/usr/bin/env python3
"""Regenerate the bundled corpus, judgments and session logs.

The refund task is built so that the need terms alone never reach two of
the relevant documents: those only share the word "reimbursement" with the
documents the need terms do find.

    python3 gen_fixtures.py   # writes next to this file
"""
import json
import os
import random

HERE = os.path.dirname(os.path.abspath(__file__))
rng = random.Random(7)

TASK = "refund-de"

HUBS = [
    ("d001", "Train ticket refund and reimbursement guide",
     "A train ticket refund is available when a train service is cancelled and the ticket is unused. Ask for reimbursement at the counter "
     "or online. The refund covers the full fare and the reimbursement arrives within two weeks."),
    ("d002", "Claiming reimbursement for a delayed train ticket",
     "Passengers with a delayed train can request a ticket refund. A train ticket refund needs the ticket. The reimbursement form lists the "
     "journey, the booking code and the bank account. A refund is paid once the claim is checked."),
    ("d003", "Ticket refund rights: reimbursement when your train is late",
     "When a train arrives late the ticket holder may ask for a refund of the train ticket. Partial reimbursement starts at "
     "sixty minutes. Keep the ticket, since the reimbursement office asks for proof of travel."),
]

BRIDGES = [
    ("d004", "Reimbursement of fares after long delays",
     "Reimbursement is paid for fares on long distance rail journeys. Apply for reimbursement with the "
     "passenger form. Reimbursement amounts depend on the delay; full reimbursement after two hours."),
    ("d005", "Fare compensation and reimbursement for rail passengers",
     "Compensation and reimbursement terms for rail passengers: a reimbursement claim must be filed "
     "within a year. Reimbursement is made by transfer, vouchers are optional."),
]

RAIL = ["train", "ticket", "refund", "station", "platform", "timetable", "booking", "seat", "carriage",
        "journey", "passenger", "conductor", "route", "schedule", "connection", "travel", "rail",
        "germany", "rules", "discount", "card", "network", "regional", "express", "night"]
OTHER = ["weather", "garden", "recipe", "bread", "oven", "river", "museum", "concert", "football",
         "library", "painting", "harbour", "mountain", "forest", "village", "market", "bicycle",
         "coffee", "theatre", "festival", "island", "bridge", "castle", "lake", "school"]
FILLER = ["the", "a", "of", "and", "for", "with", "on", "in", "at", "to", "is", "are", "new", "local",
          "daily", "small", "large", "open", "guide", "notes", "update", "review", "news", "report"]


def sentence(pool, n):
    words = []
    for _ in range(n):
        words.append(rng.choice(pool) if rng.random() < 0.55 else rng.choice(FILLER))
    s = " ".join(words)
    return s[0].upper() + s[1:] + "."


def distractor(i):
    rail = i % 3 != 0
    pool = RAIL if rail else OTHER
    topic = rng.sample(pool, 3)
    title = " ".join(w.capitalize() for w in topic)
    body = " ".join(sentence(pool, rng.randint(8, 14)) for _ in range(rng.randint(3, 6)))
    if rail and i % 2 == 0:
        # Guarantee plenty of hits for the need-term queries.
        body += " No " + rng.choice(["train", "ticket", "refund"]) + " offer applies to this " + rng.choice(["route", "card", "seat"]) + "."
    return title, body


def main():
    docs = []
    for doc_id, title, body in HUBS + BRIDGES:
        docs.append({"doc_id": doc_id, "title": title, "body": body})
    for i in range(6, 201):
        title, body = distractor(i)
        docs.append({"doc_id": f"d{i:03}", "title": title, "body": body})
    with open(os.path.join(HERE, "corpus.jsonl"), "w") as f:
        for d in docs:
            f.write(json.dumps(d) + "\n")

    with open(os.path.join(HERE, "judgments.jsonl"), "w") as f:
        for doc_id, _, _ in HUBS + BRIDGES:
            f.write(json.dumps({"task_id": TASK, "doc_id": doc_id, "grade": 3}) + "\n")
        for doc_id in ("d010", "d020"):
            f.write(json.dumps({"task_id": TASK, "doc_id": doc_id, "grade": 0}) + "\n")

    # Synthetic human sessions: query, scan, click relevant results with a
    # position-dependent probability, save some, stop.
    gammas = [0.9, 0.7, 0.55, 0.45, 0.35, 0.3, 0.25, 0.2, 0.15, 0.1]
    relevant = {d for d, _, _ in HUBS + BRIDGES}
    pool = [d["doc_id"] for d in docs]
    with open(os.path.join(HERE, "sessions.jsonl"), "w") as f:
        for s in range(40):
            t = 0.0
            events = []
            for _ in range(rng.randint(1, 2)):
                shown = rng.sample(pool[:40], 10)
                events.append({"type": "query", "t": t,
                               "payload": {"query": "train ticket refund", "results": shown}})
                t += 5.0
                for rank, doc in enumerate(shown, start=1):
                    alpha = 0.8 if doc in relevant else 0.15
                    if rng.random() < gammas[rank - 1] * alpha:
                        t += rng.uniform(2, 6)
                        events.append({"type": "click", "t": round(t, 1), "payload": {"rank": rank, "doc_id": doc}})
                        t += rng.uniform(10, 40)
                        if doc in relevant:
                            events.append({"type": "save", "t": round(t, 1), "payload": {"doc_id": doc}})
            events.append({"type": "stop", "t": round(t + 1, 1), "payload": {}})
            f.write(json.dumps({"session_id": f"s{s:02}", "task_id": TASK, "events": events}) + "\n")


if __name__ == "__main__":
    main()
