//! JSON API used by the constraint painting UI.

use crate::project::{write_atomic, Project};
use anyhow::Result;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use roiform_core::psm::io::load_particles;
use roiform_core::{field_from_mask, ConstraintDocument, FaceMask, Mesh};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::sync::Arc;
use tokio::sync::Mutex;

pub struct AppState {
    project: Project,
    meshes: Vec<Arc<Mesh>>,
    /// One lock per shape, serializing constraint writes.
    locks: Vec<Mutex<()>>,
}

impl AppState {
    pub fn new(project: Project) -> Result<Self> {
        let meshes = project.load_meshes()?;
        let locks = (0..meshes.len()).map(|_| Mutex::new(())).collect();
        Ok(Self { project, meshes, locks })
    }

    fn check_id(&self, id: usize) -> Result<(), ApiError> {
        if id < self.meshes.len() {
            Ok(())
        } else {
            Err(ApiError::NotFound(format!("no shape {id}")))
        }
    }

    fn read_constraints(&self, id: usize) -> Result<ConstraintDocument, ApiError> {
        self.project
            .constraint_document(id)
            .map_err(|e| ApiError::Internal(format!("{e:#}")))
    }

    /// Validates against the shape's mesh, then writes atomically.
    /// Caller holds the shape's lock.
    fn write_constraints(&self, id: usize, doc: &ConstraintDocument) -> Result<(), ApiError> {
        doc.resolve(&self.meshes[id])
            .map_err(|e| ApiError::BadRequest(format!("constraints rejected for shape {id}: {e}")))?;
        let text = serde_json::to_string_pretty(doc).map_err(|e| ApiError::Internal(e.to_string()))?;
        write_atomic(&self.project.constraint_path(id), text.as_bytes())
            .map_err(|e| ApiError::Internal(format!("{e:#}")))
    }
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    BadRequest(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, msg) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::Internal(m) => {
                log::error!("{m}");
                (StatusCode::INTERNAL_SERVER_ERROR, m)
            }
        };
        (status, Json(serde_json::json!({ "error": msg }))).into_response()
    }
}

type Shared = State<Arc<AppState>>;

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ShapeSummary {
    pub id: usize,
    pub name: String,
    pub mesh_url: String,
    pub constraint_url: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct MeshPayload {
    /// x0 y0 z0 x1 ...
    pub vertices: Vec<f64>,
    /// Vertex indices, three per face.
    pub faces: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PreviewRequest {
    pub face_mask: Vec<u8>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PreviewResponse {
    pub vertex_distance: Vec<f64>,
}

pub fn router(state: Arc<AppState>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/shapes", get(list_shapes))
        .route("/api/shapes/{id}/mesh", get(get_mesh))
        .route(
            "/api/shapes/{id}/constraints",
            get(get_constraints).put(put_constraints),
        )
        .route("/api/shapes/{id}/constraints/copy-to-all", post(copy_to_all))
        .route("/api/shapes/{id}/ffc/preview", post(preview_ffc))
        .route("/api/particles/{id}", get(get_particles))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

async fn list_shapes(State(state): Shared) -> Json<Vec<ShapeSummary>> {
    Json(
        state
            .project
            .file
            .shapes
            .iter()
            .enumerate()
            .map(|(id, s)| ShapeSummary {
                id,
                name: s.name.clone(),
                mesh_url: format!("/api/shapes/{id}/mesh"),
                constraint_url: format!("/api/shapes/{id}/constraints"),
            })
            .collect(),
    )
}

async fn get_mesh(State(state): Shared, UrlPath(id): UrlPath<usize>) -> Result<Json<MeshPayload>, ApiError> {
    state.check_id(id)?;
    let mesh = &state.meshes[id];
    Ok(Json(MeshPayload {
        vertices: mesh.vertices().iter().flat_map(|v| [v.x, v.y, v.z]).collect(),
        faces: mesh.faces().iter().flatten().copied().collect(),
    }))
}

async fn get_constraints(
    State(state): Shared,
    UrlPath(id): UrlPath<usize>,
) -> Result<Json<ConstraintDocument>, ApiError> {
    state.check_id(id)?;
    let _guard = state.locks[id].lock().await;
    Ok(Json(state.read_constraints(id)?))
}

async fn put_constraints(
    State(state): Shared,
    UrlPath(id): UrlPath<usize>,
    body: String,
) -> Result<StatusCode, ApiError> {
    state.check_id(id)?;
    let doc = ConstraintDocument::from_json(&body).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let _guard = state.locks[id].lock().await;
    state.write_constraints(id, &doc)?;
    Ok(StatusCode::NO_CONTENT)
}

/// Copies the source shape's planes and spheres to every other shape.
/// Free-form constraints are mesh-specific and stay as they are.
async fn copy_to_all(State(state): Shared, UrlPath(id): UrlPath<usize>) -> Result<StatusCode, ApiError> {
    state.check_id(id)?;
    // ascending order so concurrent copies cannot deadlock
    let mut guards = Vec::with_capacity(state.locks.len());
    for lock in &state.locks {
        guards.push(lock.lock().await);
    }
    let source = state.read_constraints(id)?;
    let mut updated = Vec::with_capacity(state.meshes.len());
    for target in 0..state.meshes.len() {
        if target == id {
            continue;
        }
        let mut doc = state.read_constraints(target)?;
        doc.planes = source.planes.clone();
        doc.spheres = source.spheres.clone();
        doc.resolve(&state.meshes[target])
            .map_err(|e| ApiError::BadRequest(format!("constraints rejected for shape {target}: {e}")))?;
        updated.push((target, doc));
    }
    // validate everything before writing anything
    for (target, doc) in &updated {
        state.write_constraints(*target, doc)?;
    }
    drop(guards);
    Ok(StatusCode::NO_CONTENT)
}

async fn preview_ffc(
    State(state): Shared,
    UrlPath(id): UrlPath<usize>,
    body: String,
) -> Result<Json<PreviewResponse>, ApiError> {
    state.check_id(id)?;
    let req: PreviewRequest = serde_json::from_str(&body).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let mesh = state.meshes[id].clone();
    if req.face_mask.len() != mesh.faces().len() {
        return Err(ApiError::BadRequest(format!(
            "mask has {} entries, mesh has {} faces",
            req.face_mask.len(),
            mesh.faces().len()
        )));
    }
    let mask = FaceMask::from_bits(&req.face_mask).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let n = mesh.vertices().len();
    let diag = mesh.diagonal();
    // a uniform mask has no boundary: everything is inside or outside
    if mask.included_count() == mask.len() {
        return Ok(Json(PreviewResponse {
            vertex_distance: vec![-diag; n],
        }));
    }
    if mask.included_count() == 0 {
        return Ok(Json(PreviewResponse {
            vertex_distance: vec![diag; n],
        }));
    }
    let field = tokio::task::spawn_blocking(move || field_from_mask(&mesh, &mask))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map_err(|e| ApiError::BadRequest(e.to_string()))?;
    Ok(Json(PreviewResponse {
        vertex_distance: field.vertex_distance().to_vec(),
    }))
}

async fn get_particles(State(state): Shared, UrlPath(id): UrlPath<usize>) -> Result<Json<Vec<[f64; 3]>>, ApiError> {
    state.check_id(id)?;
    let path = state.project.particle_path(id);
    if !path.is_file() {
        return Err(ApiError::NotFound(format!("no particles for shape {id}")));
    }
    let pts = load_particles::<f64>(&path).map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(Json(pts.iter().map(|p| [p.x, p.y, p.z]).collect()))
}

/// Serves until ctrl-c.
pub async fn serve(state: Arc<AppState>, port: u16, ui_dir: Option<PathBuf>) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commands::{gen_ellipsoids, GenOptions};
    use axum::body::Body;
    use axum::http::Request;
    use tower::ServiceExt;

    fn setup() -> (tempfile::TempDir, Arc<AppState>) {
        let dir = tempfile::tempdir().unwrap();
        let path = gen_ellipsoids(&GenOptions {
            values: vec![10.0],
            subdiv: 1,
            amplitude: 0.3,
            particles: 4,
            out: dir.path().to_path_buf(),
        })
        .unwrap();
        // a second shape so copy-to-all has a target
        let mut project = Project::load(&path).unwrap();
        let mut extra = project.file.shapes[0].clone();
        std::fs::copy(
            dir.path().join("meshes/ellipsoid_10_10_10.ply"),
            dir.path().join("meshes/copy.ply"),
        )
        .unwrap();
        extra.name = "copy".into();
        extra.mesh = "meshes/copy.ply".into();
        extra.particles = None;
        extra.constraints = None;
        project.file.shapes.push(extra);
        project.save(&path).unwrap();
        let project = Project::load(&path).unwrap();
        (dir, Arc::new(AppState::new(project).unwrap()))
    }

    async fn call(state: &Arc<AppState>, method: &str, uri: &str, body: &str) -> (StatusCode, serde_json::Value) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .body(Body::from(body.to_string()))
            .unwrap();
        let resp = router(state.clone(), None).oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
        let value = if bytes.is_empty() {
            serde_json::Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap()
        };
        (status, value)
    }

    #[tokio::test]
    async fn list_and_mesh() {
        let (_dir, state) = setup();
        let (s, v) = call(&state, "GET", "/api/shapes", "").await;
        assert_eq!(s, StatusCode::OK);
        let shapes: Vec<ShapeSummary> = serde_json::from_value(v).unwrap();
        assert_eq!(shapes.len(), 2);
        assert_eq!(shapes[1].mesh_url, "/api/shapes/1/mesh");
        let (s, v) = call(&state, "GET", "/api/shapes/0/mesh", "").await;
        assert_eq!(s, StatusCode::OK);
        let mesh: MeshPayload = serde_json::from_value(v).unwrap();
        assert_eq!(mesh.vertices.len(), 3 * state.meshes[0].vertices().len());
        assert_eq!(mesh.faces.len(), 3 * state.meshes[0].faces().len());
        assert_eq!(
            call(&state, "GET", "/api/shapes/9/mesh", "").await.0,
            StatusCode::NOT_FOUND
        );
    }

    #[tokio::test]
    async fn put_get_round_trip_and_rejections() {
        let (dir, state) = setup();
        let doc = r#"{"planes":[{"origin":[0,0,0],"normal":[1,0,0]}]}"#;
        assert_eq!(
            call(&state, "PUT", "/api/shapes/1/constraints", doc).await.0,
            StatusCode::NO_CONTENT
        );
        let (s, v) = call(&state, "GET", "/api/shapes/1/constraints", "").await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(v["planes"][0]["normal"], serde_json::json!([1.0, 0.0, 0.0]));
        assert!(dir.path().join("constraints/copy.json").is_file());

        assert_eq!(
            call(&state, "PUT", "/api/shapes/1/constraints", "{not json").await.0,
            StatusCode::BAD_REQUEST
        );
        let zero = r#"{"planes":[{"origin":[0,0,0],"normal":[0,0,0]}]}"#;
        assert_eq!(
            call(&state, "PUT", "/api/shapes/1/constraints", zero).await.0,
            StatusCode::BAD_REQUEST
        );
        let wrong_mask = r#"{"ffcs":[{"face_mask":[1,0]}]}"#;
        assert_eq!(
            call(&state, "PUT", "/api/shapes/1/constraints", wrong_mask).await.0,
            StatusCode::BAD_REQUEST
        );
        // rejected writes leave the stored document alone
        let (_, v) = call(&state, "GET", "/api/shapes/1/constraints", "").await;
        assert_eq!(v["planes"].as_array().unwrap().len(), 1);
    }

    #[tokio::test]
    async fn copy_to_all_keeps_target_ffcs() {
        let (_dir, state) = setup();
        let (_, mut src) = call(&state, "GET", "/api/shapes/0/constraints", "").await;
        src["spheres"] = serde_json::json!([{"center":[0.0,0.0,0.0],"radius":2.0,"mode":"exclude_inside"}]);
        let (s, _) = call(&state, "PUT", "/api/shapes/0/constraints", &src.to_string()).await;
        assert_eq!(s, StatusCode::NO_CONTENT);

        // target: a plane that gets replaced and its own flipped mask that must survive
        let flipped: Vec<u8> = src["ffcs"][0]["face_mask"]
            .as_array()
            .unwrap()
            .iter()
            .map(|b| 1 - b.as_u64().unwrap() as u8)
            .collect();
        let own = serde_json::json!({
            "planes": [{"origin":[0.0,0.0,0.0],"normal":[0.0,1.0,0.0]}],
            "ffcs": [{"face_mask": flipped}],
        });
        assert_eq!(
            call(&state, "PUT", "/api/shapes/1/constraints", &own.to_string())
                .await
                .0,
            StatusCode::NO_CONTENT
        );

        assert_eq!(
            call(&state, "POST", "/api/shapes/0/constraints/copy-to-all", "")
                .await
                .0,
            StatusCode::NO_CONTENT
        );
        let (_, target) = call(&state, "GET", "/api/shapes/1/constraints", "").await;
        assert_eq!(target["spheres"], src["spheres"]);
        assert_eq!(target["planes"], serde_json::json!([]));
        assert_eq!(target["ffcs"], own["ffcs"]);
        assert_eq!(
            call(&state, "POST", "/api/shapes/5/constraints/copy-to-all", "")
                .await
                .0,
            StatusCode::NOT_FOUND
        );
    }

    #[tokio::test]
    async fn preview_cases() {
        let (_dir, state) = setup();
        let faces = state.meshes[0].faces().len();
        let verts = state.meshes[0].vertices().len();
        let diag = state.meshes[0].diagonal();

        let all = serde_json::json!({ "face_mask": vec![1u8; faces] }).to_string();
        let (s, v) = call(&state, "POST", "/api/shapes/0/ffc/preview", &all).await;
        assert_eq!(s, StatusCode::OK);
        let d: Vec<f64> = serde_json::from_value(v["vertex_distance"].clone()).unwrap();
        assert_eq!(d, vec![-diag; verts]);

        let half: Vec<u8> = (0..faces)
            .map(|f| (state.meshes[0].face_centroid(f).z > 0.0) as u8)
            .collect();
        let body = serde_json::json!({ "face_mask": half }).to_string();
        let (s, v) = call(&state, "POST", "/api/shapes/0/ffc/preview", &body).await;
        assert_eq!(s, StatusCode::OK);
        let d: Vec<f64> = serde_json::from_value(v["vertex_distance"].clone()).unwrap();
        assert_eq!(d.len(), verts);
        assert!(d.iter().any(|x| *x < 0.0) && d.iter().any(|x| *x > 0.0));

        let short = serde_json::json!({ "face_mask": [1, 0] }).to_string();
        assert_eq!(
            call(&state, "POST", "/api/shapes/0/ffc/preview", &short).await.0,
            StatusCode::BAD_REQUEST
        );
    }

    #[tokio::test]
    async fn particles_endpoint() {
        let (dir, state) = setup();
        assert_eq!(
            call(&state, "GET", "/api/particles/0", "").await.0,
            StatusCode::NOT_FOUND
        );
        let path = state.project.particle_path(0);
        write_atomic(&path, b"1 2 3\n4 5 6\n").unwrap();
        let (s, v) = call(&state, "GET", "/api/particles/0", "").await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(v, serde_json::json!([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]));
        assert_eq!(
            call(&state, "GET", "/api/particles/7", "").await.0,
            StatusCode::NOT_FOUND
        );
        drop(dir);
    }

    #[tokio::test]
    async fn serves_ui_files() {
        let (dir, state) = setup();
        let ui = dir.path().join("ui");
        std::fs::create_dir_all(&ui).unwrap();
        std::fs::write(ui.join("index.html"), "<html></html>").unwrap();
        let req = Request::builder().uri("/index.html").body(Body::empty()).unwrap();
        let resp = router(state, Some(ui)).oneshot(req).await.unwrap();
        assert_eq!(resp.status(), StatusCode::OK);
    }
}
