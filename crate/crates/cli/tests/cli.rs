use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

const BIN: &str = env!("CARGO_BIN_EXE_beestar");

fn programs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../programs")
}

/// A `beestar` child killed on drop.
struct Proc(Child);

impl Drop for Proc {
    fn drop(&mut self) {
        unsafe {
            libc::kill(self.0.id() as i32, libc::SIGTERM);
        }
        let deadline = Instant::now() + Duration::from_secs(5);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.0.try_wait() {
                return;
            }
            std::thread::sleep(Duration::from_millis(20));
        }
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn serve(extra: &[&str]) -> (Proc, String) {
    let mut child = Command::new(BIN)
        .args(["serve", "--port", "0"])
        .args(extra)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut first = String::new();
    BufReader::new(child.stdout.as_mut().unwrap()).read_line(&mut first).unwrap();
    let url = first.trim().strip_prefix("serving on ").expect("serve prints its url").to_string();
    (Proc(child), url)
}

fn cli(server: &str, args: &[&str]) -> Output {
    Command::new(BIN)
        .arg("--server")
        .arg(server)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Starts `run` in the background and waits for it to print the dashboard line.
fn run_program(server: &str, program: &Path, target: &str) -> Proc {
    let mut child = Command::new(BIN)
        .arg("--server")
        .arg(server)
        .arg("run")
        .arg(program)
        .args(["--target", target])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut reader = BufReader::new(child.stdout.take().unwrap());
    let mut line = String::new();
    loop {
        line.clear();
        assert!(reader.read_line(&mut line).unwrap() > 0, "run exited early");
        if line.starts_with("dashboard: ") {
            break;
        }
    }
    std::thread::spawn(move || {
        let mut sink = Vec::new();
        let _ = reader.read_to_end(&mut sink);
    });
    Proc(child)
}

fn watch_until(server: &str, needle_count: impl Fn(&[String]) -> bool) -> Vec<String> {
    let mut child = Command::new(BIN)
        .args(["--server", server, "watch"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let reader = BufReader::new(child.stdout.take().unwrap());
    let mut lines = Vec::new();
    for line in reader.lines() {
        lines.push(line.unwrap());
        if needle_count(&lines) {
            break;
        }
    }
    let _ = child.kill();
    let _ = child.wait();
    lines
}

#[test]
fn clip_program_runs_end_to_end_on_the_simulated_target() {
    let (_server, url) = serve(&[]);
    let _run = run_program(&url, &programs().join("clip.json"), "simulated");
    let o = cli(&url, &["set", "Prompt", "word", r#""bulldozer""#]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("triggers [CLIPAgent]"));

    let lines = watch_until(&url, |ls| ls.iter().any(|l| l.contains(r#""new":"BULLDOZER""#)));
    let agent_props: Vec<&str> = lines
        .iter()
        .filter(|l| l.contains(r#""entity":"CLIPAgent""#))
        .filter_map(|l| {
            ["\"prop\":\"input\"", "\"prop\":\"output\""]
                .into_iter()
                .find(|p| l.contains(p))
        })
        .collect();
    assert_eq!(agent_props, vec!["\"prop\":\"input\"", "\"prop\":\"output\""]);
}

#[test]
fn local_target_spawns_agent_processes() {
    let (_server, url) = serve(&[]);
    let _run = run_program(&url, &programs().join("clip.json"), "local");
    cli(&url, &["set", "CLIPInputEntity", "value", r#""crane""#]);
    let deadline = Instant::now() + Duration::from_secs(10);
    loop {
        let show = stdout(&cli(&url, &["show", "CLIPAgent"]));
        if show.contains("\"CRANE\"") {
            break;
        }
        assert!(Instant::now() < deadline, "agent never answered:\n{show}");
        std::thread::sleep(Duration::from_millis(50));
    }
}

#[test]
fn user_errors_exit_1() {
    let (_server, url) = serve(&["--load", programs().join("clip.json").to_str().unwrap()]);
    let o = cli(&url, &["set", "Nobody", "word", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown entity"));
    assert_eq!(cli(&url, &["set", "Prompt", "word", "not-json"]).status.code(), Some(1));
    assert_eq!(cli(&url, &["set", "Prompt", "word", "3"]).status.code(), Some(1));
    assert_eq!(cli(&url, &["msg", "CLIPAgent", "dance"]).status.code(), Some(1));
    assert_eq!(cli(&url, &["show", "Nobody"]).status.code(), Some(1));
}

#[test]
fn server_and_agent_failures_exit_2() {
    let (_server, url) = serve(&["--load", programs().join("clip.json").to_str().unwrap()]);
    // Loaded but no runtime registered.
    assert_eq!(cli(&url, &["msg", "CLIPAgent", "play"]).status.code(), Some(2));
    assert_eq!(cli("127.0.0.1:1", &["ls"]).status.code(), Some(2));
}

#[test]
fn export_then_reload_gives_the_same_ls_output() {
    let dir = tempfile::tempdir().unwrap();
    let exported = dir.path().join("exported.json");
    let (_a, url_a) = serve(&["--load", programs().join("labeling.json").to_str().unwrap()]);
    cli(&url_a, &["set", "Prompt", "query", r#"{"word":"crane","images":["x/crane.jpg"]}"#]);
    assert!(cli(&url_a, &["export", exported.to_str().unwrap()]).status.success());
    let (_b, url_b) = serve(&["--load", exported.to_str().unwrap()]);
    let ls_a = stdout(&cli(&url_a, &["ls"]));
    let ls_b = stdout(&cli(&url_b, &["ls"]));
    assert_eq!(ls_a, ls_b);
    assert!(ls_a.contains("Gallery\tGalleryEntity < DisplayEntity < Entity"));
    let show_a = stdout(&cli(&url_a, &["show", "Prompt"]));
    assert!(stdout(&cli(&url_b, &["show", "Prompt"])).contains("crane"));
    assert!(show_a.contains("crane"));
}

#[test]
fn container_run_writes_manifests_and_exits() {
    let dir = tempfile::tempdir().unwrap();
    let (_server, url) = serve(&[]);
    let o = Command::new(BIN)
        .args(["--server", &url, "run"])
        .arg(programs().join("fetcher.json"))
        .args(["--target", "container", "--manifest-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("fetcher.yaml")).unwrap();
    assert!(text.contains("pip install requests\n          pip install pillow\n"));
    let printed = stdout(&cli(&url, &["manifest", "Fetcher"]));
    assert_eq!(printed, text);
}

#[test]
fn serve_hosts_dashboard_assets() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<html>dash</html>").unwrap();
    let (_server, url) = serve(&["--ui", dir.path().to_str().unwrap()]);
    let addr = url.trim_start_matches("http://");
    let mut sock = std::net::TcpStream::connect(addr).unwrap();
    use std::io::Write;
    write!(sock, "GET /index.html HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    sock.read_to_string(&mut resp).unwrap();
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    assert!(resp.contains("<html>dash</html>"));
}
