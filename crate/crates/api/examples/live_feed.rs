//! Start the mission in real time, trigger a broadcast through the service
//! handle, and print log records as they stream in for a few seconds.
//!
//! With `cargo run -p seatwin-api --bin seatwin -- serve` the same feed is
//! at `curl -N localhost:8080/stream`.

use std::time::Duration;

use seatwin::basestation::{ApiRequest, ApiResponse};
use seatwin::harness::MissionConfig;
use seatwin_api::MissionService;

fn main() {
    let (service, _mission) = MissionService::spawn(MissionConfig::default_mission(), None).unwrap();
    let rt = tokio::runtime::Runtime::new().unwrap();
    rt.block_on(async {
        let mut feed = service.subscribe();
        if let Some(ApiResponse::Broadcast(b)) = service.call(ApiRequest::Broadcast { event: "Hypoxia".into() }).await {
            println!("broadcast sent in {} frame(s)", b.frames);
        }
        let deadline = tokio::time::Instant::now() + Duration::from_secs(5);
        while let Ok(Ok(r)) = tokio::time::timeout_at(deadline, feed.recv()).await {
            println!(
                "#{:<4} {}  {:<9} {:<11} {}",
                r.seq,
                r.t,
                format!("{:?}", r.kind),
                seatwin::twin::Platform::from_id(r.platform_id).map_or("ship", |p| p.name()),
                r.type_name.as_deref().unwrap_or("")
            );
        }
    });
}
