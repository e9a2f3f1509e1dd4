//! Service tasks with an http binding, against a stub server on localhost.

mod common;

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;

use serde_json::{json, Value as Json};
use tabforge::bpmn::parse_bpmn;
use tabforge::defsm::compile;
use tabforge::dmn::Value;

use common::memory_gateway;

/// Serve one request per scripted reply. Received bodies go to the channel.
fn stub(replies: Vec<(u16, String)>) -> (String, mpsc::Receiver<Json>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/price", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        length = v.trim().parse().unwrap();
                    }
                }
            }
            let mut received = vec![0; length];
            reader.read_exact(&mut received).unwrap();
            let _ = tx.send(serde_json::from_slice(&received).unwrap_or(Json::Null));
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, rx)
}

fn model(url: &str) -> String {
    let binding = json!([{"source": "http"}, {"url": url}, {"in": {"name": "amount", "var": "amount"}}, {"out": {"var": "total", "path": "result.total"}}]);
    format!(
        r#"<?xml version="1.0"?>
<definitions xmlns="http://www.omg.org/spec/BPMN/20100524/MODEL" id="d">
<process id="Pricing">
  <startEvent id="S"/>
  <userTask id="Order"><dataOutputAssociation><targetRef>OrderDoc</targetRef></dataOutputAssociation></userTask>
  <serviceTask id="Price"/>
  <endEvent id="E"/>
  <sequenceFlow id="f1" sourceRef="S" targetRef="Order"/>
  <sequenceFlow id="f2" sourceRef="Order" targetRef="Price"/>
  <sequenceFlow id="f3" sourceRef="Price" targetRef="E"/>
  <dataObject id="OrderDoc" name="Order"/>
  <textAnnotation id="OrderBinding"><text>[{{"source":"file"}},{{"field":"amount"}}]</text></textAnnotation>
  <association id="a1" sourceRef="OrderDoc" targetRef="OrderBinding"/>
  <textAnnotation id="PriceBinding"><text>{}</text></textAnnotation>
  <association id="a2" sourceRef="Price" targetRef="PriceBinding"/>
</process></definitions>"#,
        binding.to_string().replace('&', "&amp;").replace('<', "&lt;")
    )
}

fn at_price_task(url: &str) -> (tabforge::gateway::Gateway, String) {
    let pkg = compile(&parse_bpmn(model(url)).unwrap(), &[]).unwrap();
    let gw = memory_gateway();
    let contract = gw.deploy(&pkg).unwrap();
    let inst = gw.start(&contract).unwrap();
    let cid = gw.put_document(br#"{"amount": 120, "note": "ignored"}"#).unwrap();
    gw.complete(&inst, "Order", BTreeMap::new(), &[cid]).unwrap();
    assert_eq!(gw.tasks(&inst).unwrap(), ["Price"]);
    (gw, inst)
}

#[test]
fn service_reply_lands_in_instance_variables() {
    let (url, bodies) = stub(vec![(200, r#"{"result":{"total":240.5,"currency":"NZD"}}"#.into())]);
    let (gw, inst) = at_price_task(&url);
    gw.complete(&inst, "Price", BTreeMap::new(), &[]).unwrap();
    assert_eq!(bodies.recv().unwrap(), json!({"amount": 120}));
    let state = gw.instance(&inst).unwrap();
    assert_eq!(state.variables.get("total"), Value::number("240.5"));
    assert!(!state.variables.contains("currency"));
    assert_eq!(state.status, tabforge::defsm::RunStatus::Completed);
}

#[test]
fn failing_service_never_reaches_the_chain() {
    let (url, _bodies) = stub(vec![(503, "{}".into()), (200, r#"{"result":{}}"#.into())]);
    let (gw, inst) = at_price_task(&url);
    let before = (gw.state_hash(), gw.chain().height());

    let err = gw.complete(&inst, "Price", BTreeMap::new(), &[]).unwrap_err();
    assert_eq!(err.code, "HttpFailure");
    let err = gw.complete(&inst, "Price", BTreeMap::new(), &[]).unwrap_err();
    assert_eq!(err.code, "FieldMissing");
    assert_eq!((gw.state_hash(), gw.chain().height()), before);
}

#[test]
fn unreachable_service_is_an_http_failure() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let (gw, inst) = at_price_task(&format!("http://127.0.0.1:{port}/gone"));
    assert_eq!(gw.complete(&inst, "Price", BTreeMap::new(), &[]).unwrap_err().code, "HttpFailure");
}
