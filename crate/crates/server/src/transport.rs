use std::io::{self, BufRead, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;

use tungstenite::Message;

use crate::Server;

/// One JSON document per line in, one per line out. Blank lines are
/// skipped; only responses go to `output`.
pub fn serve_stdio(server: &Server, input: impl BufRead, mut output: impl Write) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if let Some(reply) = server.handle(&line) {
            writeln!(output, "{reply}")?;
            output.flush()?;
        }
    }
    Ok(())
}

/// Listens on `127.0.0.1:port`; one thread per connection.
pub fn serve_websocket(server: Arc<Server>, port: u16) -> io::Result<()> {
    let listener = TcpListener::bind(("127.0.0.1", port))?;
    log::info!("listening on ws://{}", listener.local_addr()?);
    serve_websocket_on(server, listener)
}

pub fn serve_websocket_on(server: Arc<Server>, listener: TcpListener) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let server = Arc::clone(&server);
        thread::spawn(move || {
            if let Err(e) = connection(&server, stream) {
                log::warn!("connection closed: {e}");
            }
        });
    }
    Ok(())
}

fn connection(server: &Server, stream: TcpStream) -> tungstenite::Result<()> {
    let mut ws = tungstenite::accept(stream).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(e) => e,
        tungstenite::HandshakeError::Interrupted(_) => tungstenite::Error::ConnectionClosed,
    })?;
    loop {
        match ws.read()? {
            Message::Text(text) => {
                if let Some(reply) = server.handle(&text) {
                    ws.send(Message::text(reply))?;
                }
            }
            Message::Close(_) => return Ok(()),
            _ => {}
        }
    }
}
