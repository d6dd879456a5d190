//! HTTP API over a directory of study documents: browse studies, fetch
//! images, correct keypoints with optimistic versioning, and compute
//! measurements and diagnoses on the fly.

pub mod api;
pub mod store;

use std::net::SocketAddr;
use std::sync::Arc;

pub use api::{router, AppState};
pub use store::{Snapshot, StoreError, StudyStore};

use hipmetrics_core::scoring::{AngleRanges, ScoringParams};

impl AppState {
    pub fn new(store: StudyStore, params: ScoringParams) -> Self {
        Self { store: Arc::new(store), params, ranges: AngleRanges::default() }
    }
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
