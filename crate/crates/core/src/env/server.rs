use super::{ConfigCatalog, Connection};
use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::Arc;
use std::thread;

/// Serves one connection until the reader hits end of stream.
pub fn serve_stream<R: BufRead, W: Write>(reader: R, mut writer: W, catalog: &ConfigCatalog) -> io::Result<()> {
    let mut conn = Connection::new(catalog);
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = conn.handle_line(&line);
        writer.write_all(reply.as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(())
}

pub fn serve_stdio(catalog: &ConfigCatalog) -> io::Result<()> {
    serve_stream(io::stdin().lock(), io::stdout().lock(), catalog)
}

/// Accepts connections forever, one thread and one session per connection.
pub fn serve_tcp(listener: TcpListener, catalog: Arc<ConfigCatalog>) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let peer = stream.peer_addr().ok();
        let catalog = Arc::clone(&catalog);
        thread::spawn(move || {
            tracing::info!(?peer, "connection opened");
            let result = stream
                .try_clone()
                .and_then(|w| serve_stream(BufReader::new(stream), w, &catalog));
            match result {
                Ok(()) => tracing::info!(?peer, "connection closed"),
                Err(err) => tracing::warn!(?peer, %err, "connection dropped"),
            }
        });
    }
    Ok(())
}
