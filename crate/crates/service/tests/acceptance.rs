//! End-to-end service check. Prints one PASS/FAIL line and exits non-zero on
//! failure.

mod common;

use std::process::ExitCode;

use axum::http::{Method, StatusCode};
use common::{app, Client, Reply, TEXT};
use relgraph_core::kb::load_kb;
use relgraph_core::{close, detect_conflicts, GraphDocument};
use serde_json::{json, Value};

type Check = Result<(), String>;

fn ensure(ok: bool, what: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

/// The served graph is a closure fixpoint and its conflicts equal a fresh
/// detection pass.
async fn served_state_is_sound(c: &Client, sid: &str) -> Check {
    let export = c.get(&format!("/sessions/{sid}/export")).await.text();
    let doc: GraphDocument = serde_json::from_str(&export).map_err(|e| format!("export: {e}"))?;
    let served: Vec<String> = doc
        .conflicts
        .clone()
        .unwrap_or_default()
        .into_iter()
        .map(|c| c.id)
        .collect();
    let g = doc.into_graph().map_err(|e| format!("export: {e}"))?;
    let kb_text = c.get(&format!("/sessions/{sid}/kb")).await.json()["text"]
        .as_str()
        .unwrap_or_default()
        .to_string();
    let kb = load_kb(&kb_text).map_err(|e| format!("kb: {e}"))?;
    let again = close(&g, &kb).map_err(|e| e.to_string())?;
    ensure(again.derivations.is_empty(), || {
        format!(
            "served graph is not closed: {} more derivations",
            again.derivations.len()
        )
    })?;
    let fresh: Vec<String> = detect_conflicts(&g, &kb)
        .into_iter()
        .map(|c| c.id)
        .collect();
    ensure(fresh == served, || {
        format!("served conflicts {served:?} but detection gives {fresh:?}")
    })
}

fn expect(r: &Reply, status: StatusCode, step: &str) -> Result<Value, String> {
    if r.status == status {
        Ok(r.json())
    } else {
        Err(format!(
            "{step}: expected {status}, got {} {}",
            r.status,
            r.text()
        ))
    }
}

async fn scenario() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (sid, export, rev) = {
        let c = Client::new(app(dir.path()));
        let created = c
            .post("/sessions", json!({ "text": TEXT, "title": "farm" }))
            .await;
        let sid = expect(&created, StatusCode::CREATED, "create")?["session_id"]
            .as_str()
            .unwrap_or_default()
            .to_string();
        let mut rev = 0;

        let r = c
            .post(&format!("/sessions/{sid}/extract/characters"), json!({}))
            .await;
        bump(
            &mut rev,
            &expect(&r, StatusCode::OK, "extract characters")?,
            "extract characters",
        )?;
        served_state_is_sound(&c, &sid).await?;
        let names: Vec<Value> = c.get(&format!("/sessions/{sid}/graph")).await.json()["graph"]
            ["entities"]
            .as_array()
            .cloned()
            .unwrap_or_default();
        ensure(names.len() == 2, || {
            format!("expected 2 candidates, saw {}", names.len())
        })?;

        for e in &names {
            let id = e["id"].as_str().unwrap_or_default();
            let r = c
                .send(
                    Method::PATCH,
                    &format!("/sessions/{sid}/entities/{id}"),
                    Some(json!({ "status": "confirmed" })),
                    Some(rev),
                )
                .await;
            bump(
                &mut rev,
                &expect(&r, StatusCode::OK, "confirm entity")?,
                "confirm entity",
            )?;
        }

        let r = c
            .post(&format!("/sessions/{sid}/extract/relations"), json!({}))
            .await;
        let body = expect(&r, StatusCode::OK, "extract relations")?;
        bump(&mut rev, &body, "extract relations")?;
        served_state_is_sound(&c, &sid).await?;
        let conflicts = body["conflicts"].as_array().cloned().unwrap_or_default();
        ensure(conflicts.len() == 1, || {
            format!("expected 1 conflict, saw {}", conflicts.len())
        })?;
        let cid = conflicts[0]["id"].as_str().unwrap_or_default().to_string();

        let stale = c
            .send(
                Method::PATCH,
                &format!(
                    "/sessions/{sid}/entities/{}",
                    names[0]["id"].as_str().unwrap_or_default()
                ),
                Some(json!({ "canonical": "X" })),
                Some(rev - 1),
            )
            .await;
        expect(&stale, StatusCode::CONFLICT, "stale write")?;

        let url = format!("/sessions/{sid}/conflicts/{cid}/resolve");
        let proposal = expect(
            &c.post(&url, json!({ "mode": "auto" })).await,
            StatusCode::OK,
            "auto resolve",
        )?;
        let label = proposal["proposal"]["answer_label"]
            .as_str()
            .unwrap_or_default()
            .to_string();
        ensure(c_revision(&c, &sid).await == rev, || {
            "auto resolve wrote to the session".into()
        })?;

        let r = c
            .post(
                &url,
                json!({ "mode": "choice", "choice": label, "revision": rev }),
            )
            .await;
        let body = expect(&r, StatusCode::OK, "apply resolution")?;
        bump(&mut rev, &body, "apply resolution")?;
        ensure(
            body["conflicts"].as_array().is_some_and(|a| a.is_empty()),
            || "conflict still open after resolution".into(),
        )?;
        served_state_is_sound(&c, &sid).await?;

        let export = c.get(&format!("/sessions/{sid}/export")).await.text();
        (sid, export, rev)
    };

    let c = Client::new(app(dir.path()));
    let after = c.get(&format!("/sessions/{sid}/export")).await.text();
    ensure(after == export, || "export differs after restart".into())?;
    ensure(c_revision(&c, &sid).await == rev, || {
        "revision differs after restart".into()
    })?;
    served_state_is_sound(&c, &sid).await?;
    Ok(format!(
        "{rev} writes, each bumping the revision once; served graphs closed and conflict-complete; \
         export identical after restart; stale write refused with 409"
    ))
}

/// Every write must move the revision forward by exactly one.
fn bump(rev: &mut u64, v: &Value, step: &str) -> Check {
    let got = v["revision"].as_u64().unwrap_or(u64::MAX);
    ensure(got == *rev + 1, || {
        format!("{step}: revision {got}, expected {}", *rev + 1)
    })?;
    *rev = got;
    Ok(())
}

async fn c_revision(c: &Client, sid: &str) -> u64 {
    c.get(&format!("/sessions/{sid}")).await.json()["revision"]
        .as_u64()
        .unwrap_or(u64::MAX)
}

#[tokio::main]
async fn main() -> ExitCode {
    match scenario().await {
        Ok(detail) => {
            println!("PASS service end-to-end: {detail}");
            ExitCode::SUCCESS
        }
        Err(why) => {
            println!("FAIL service end-to-end: {why}");
            ExitCode::FAILURE
        }
    }
}
