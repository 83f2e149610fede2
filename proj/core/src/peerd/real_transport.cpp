#include "collab/peerd/real_transport.hpp"

#include <chrono>
#include <deque>
#include <map>
#include <unordered_map>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/ip/udp.hpp>
#include <boost/asio/read.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/asio/write.hpp>

#include "collab/common/error.hpp"

namespace collab::peerd {

namespace asio = boost::asio;
using asio::ip::tcp;
using asio::ip::udp;
using netsim::EndpointAddr;
using netsim::StreamId;
using netsim::StreamListener;

namespace {

constexpr std::uint32_t kMaxFrame = 16 * 1024 * 1024;

asio::ip::address_v4 to_ip(const EndpointAddr& a) { return asio::ip::address_v4(a.ipv4_host_order()); }

EndpointAddr from_ip(const asio::ip::address& ip, std::uint16_t port) {
  auto v4 = ip.is_v4() ? ip.to_v4() : ip.to_v6().to_v4();
  return EndpointAddr::ipv4(v4.to_uint(), port);
}

}  // namespace

struct RealTransport::Impl : std::enable_shared_from_this<Impl> {
  struct Stream {
    StreamId id = 0;
    tcp::socket socket;
    StreamListener* listener = nullptr;
    bool connected = false;
    bool accepted = false;  // service frame still expected
    bool closing = false;
    bool writing = false;
    std::deque<std::shared_ptr<Bytes>> out;
    std::array<std::uint8_t, 4> header{};
    Bytes body;
    EndpointAddr peer;

    explicit Stream(asio::io_context& io) : socket(io) {}
  };

  asio::io_context& io;
  EndpointAddr local;
  std::chrono::steady_clock::time_point origin = std::chrono::steady_clock::now();
  udp::socket udp_sock;
  tcp::acceptor acceptor;
  std::array<std::uint8_t, 65536> udp_buf{};
  udp::endpoint udp_from;
  std::function<void(const netsim::Datagram&)> receiver;
  std::map<std::string, StreamListener*> listeners;
  std::unordered_map<StreamId, std::shared_ptr<Stream>> streams;
  std::unordered_map<netsim::TimerId, std::shared_ptr<asio::steady_timer>> timers;
  StreamId next_stream = 1;
  netsim::TimerId next_timer = 1;
  bool stopped = false;

  Impl(asio::io_context& ctx, const EndpointAddr& addr) : io(ctx), local(addr), udp_sock(ctx), acceptor(ctx) {}

  netsim::SimTime now() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - origin).count();
  }

  void open() {
    boost::system::error_code ec;
    udp::endpoint uep(to_ip(local), local.port);
    udp_sock.open(udp::v4(), ec);
    if (!ec) udp_sock.bind(uep, ec);
    if (ec) throw Error(Errc::io, "udp bind " + uep.address().to_string() + ":" + std::to_string(local.port) + ": " + ec.message());
    tcp::endpoint tep(to_ip(local), udp_sock.local_endpoint().port());
    acceptor.open(tcp::v4(), ec);
    if (!ec) acceptor.set_option(tcp::acceptor::reuse_address(true), ec);
    if (!ec) acceptor.bind(tep, ec);
    if (!ec) acceptor.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) throw Error(Errc::io, "tcp bind " + tep.address().to_string() + ":" + std::to_string(tep.port()) + ": " + ec.message());
    local.port = udp_sock.local_endpoint().port();  // port 0 picks one
    read_udp();
    accept();
  }

  void shutdown() {
    stopped = true;
    receiver = nullptr;
    listeners.clear();
    boost::system::error_code ec;
    udp_sock.close(ec);
    acceptor.close(ec);
    for (auto& [id, s] : streams) s->socket.close(ec);
    streams.clear();
    for (auto& [id, t] : timers) t->cancel();
    timers.clear();
  }

  void read_udp() {
    udp_sock.async_receive_from(asio::buffer(udp_buf), udp_from,
                                [self = shared_from_this()](boost::system::error_code ec, std::size_t n) {
                                  if (self->stopped) return;
                                  if (!ec && self->receiver) {
                                    netsim::Datagram d;
                                    d.src = from_ip(self->udp_from.address(), self->udp_from.port());
                                    d.dst = self->local;
                                    d.payload.assign(self->udp_buf.begin(), self->udp_buf.begin() + static_cast<std::ptrdiff_t>(n));
                                    d.send_time = self->now();
                                    self->receiver(d);
                                  }
                                  if (!self->stopped) self->read_udp();
                                });
  }

  void accept() {
    auto s = std::make_shared<Stream>(io);
    acceptor.async_accept(s->socket, [self = shared_from_this(), s](boost::system::error_code ec) {
      if (self->stopped) return;
      if (!ec) {
        boost::system::error_code ec2;
        auto rep = s->socket.remote_endpoint(ec2);
        if (!ec2) {
          s->id = self->next_stream++;
          s->connected = true;
          s->accepted = true;
          s->peer = from_ip(rep.address(), rep.port());
          s->socket.set_option(tcp::no_delay(true), ec2);
          self->streams[s->id] = s;
          self->read_header(s);
        }
      }
      self->accept();
    });
  }

  void read_header(const std::shared_ptr<Stream>& s) {
    asio::async_read(s->socket, asio::buffer(s->header), [self = shared_from_this(), s](boost::system::error_code ec, std::size_t) {
      if (self->stopped || !self->streams.contains(s->id)) return;
      if (ec) return self->drop(s, ec == asio::error::eof ? "closed" : "reset");
      std::uint32_t len = (std::uint32_t{s->header[0]} << 24) | (std::uint32_t{s->header[1]} << 16) |
                          (std::uint32_t{s->header[2]} << 8) | s->header[3];
      if (len > kMaxFrame) return self->drop(s, "reset");
      s->body.resize(len);
      asio::async_read(s->socket, asio::buffer(s->body), [self, s](boost::system::error_code ec2, std::size_t) {
        if (self->stopped || !self->streams.contains(s->id)) return;
        if (ec2) return self->drop(s, "reset");
        self->on_frame(s);
      });
    });
  }

  void on_frame(const std::shared_ptr<Stream>& s) {
    if (s->accepted) {
      s->accepted = false;
      std::string service(s->body.begin(), s->body.end());
      auto it = listeners.find(service);
      if (it == listeners.end() || it->second == nullptr) {
        boost::system::error_code ec;
        s->socket.close(ec);
        streams.erase(s->id);
        return;
      }
      s->listener = it->second;
      s->listener->on_stream_open(s->id, s->peer, service);
    } else if (s->listener != nullptr) {
      s->listener->on_stream_message(s->id, std::move(s->body));
    }
    if (streams.contains(s->id)) read_header(s);
  }

  // Stream ended from the remote side or by error: notify and forget.
  void drop(const std::shared_ptr<Stream>& s, std::string_view reason) {
    streams.erase(s->id);
    boost::system::error_code ec;
    s->socket.close(ec);
    if (s->listener != nullptr && !s->closing) s->listener->on_stream_closed(s->id, reason);
  }

  void enqueue(const std::shared_ptr<Stream>& s, ByteView body) {
    auto frame = std::make_shared<Bytes>();
    frame->reserve(body.size() + 4);
    auto n = static_cast<std::uint32_t>(body.size());
    frame->push_back(static_cast<std::uint8_t>(n >> 24));
    frame->push_back(static_cast<std::uint8_t>(n >> 16));
    frame->push_back(static_cast<std::uint8_t>(n >> 8));
    frame->push_back(static_cast<std::uint8_t>(n));
    frame->insert(frame->end(), body.begin(), body.end());
    s->out.push_back(std::move(frame));
    pump(s);
  }

  void pump(const std::shared_ptr<Stream>& s) {
    if (!s->connected || s->writing) return;
    if (s->out.empty()) {
      if (s->closing) {
        boost::system::error_code ec;
        s->socket.shutdown(tcp::socket::shutdown_both, ec);
        s->socket.close(ec);
        streams.erase(s->id);
      }
      return;
    }
    s->writing = true;
    auto frame = s->out.front();
    asio::async_write(s->socket, asio::buffer(*frame), [self = shared_from_this(), s, frame](boost::system::error_code ec, std::size_t) {
      s->writing = false;
      if (self->stopped || !self->streams.contains(s->id)) return;
      if (ec) return self->drop(s, "reset");
      s->out.pop_front();
      self->pump(s);
    });
  }
};

RealTransport::RealTransport(asio::io_context& io, const EndpointAddr& listen)
    : impl_(std::make_shared<Impl>(io, listen)) {
  if (!listen.is_ipv4_mapped()) throw Error(Errc::config, "listen address must be IPv4");
  impl_->open();
}

RealTransport::~RealTransport() { impl_->shutdown(); }

const EndpointAddr& RealTransport::local_addr() const { return impl_->local; }
netsim::SimTime RealTransport::now() const { return impl_->now(); }

void RealTransport::send(const EndpointAddr& dst, ByteView payload) {
  if (!dst.is_ipv4_mapped() || payload.size() > netsim::kMaxDatagram) return;
  auto buf = std::make_shared<Bytes>(payload.begin(), payload.end());
  impl_->udp_sock.async_send_to(asio::buffer(*buf), udp::endpoint(to_ip(dst), dst.port),
                                [buf](boost::system::error_code, std::size_t) {});
}

void RealTransport::set_receiver(std::function<void(const netsim::Datagram&)> handler) { impl_->receiver = std::move(handler); }

netsim::TimerId RealTransport::schedule(netsim::SimTime delay, std::function<void()> fn) {
  auto id = impl_->next_timer++;
  auto t = std::make_shared<asio::steady_timer>(impl_->io, std::chrono::milliseconds(std::max<netsim::SimTime>(delay, 0)));
  impl_->timers[id] = t;
  t->async_wait([self = impl_, id, fn = std::move(fn)](boost::system::error_code ec) {
    if (ec || self->stopped) return;
    if (self->timers.erase(id) == 0) return;
    fn();
  });
  return id;
}

void RealTransport::cancel(netsim::TimerId id) {
  auto it = impl_->timers.find(id);
  if (it == impl_->timers.end()) return;
  it->second->cancel();
  impl_->timers.erase(it);
}

void RealTransport::listen(const std::string& service, StreamListener* listener) {
  if (listener == nullptr) impl_->listeners.erase(service);
  else impl_->listeners[service] = listener;
}

StreamId RealTransport::connect(const EndpointAddr& dst, const std::string& service, StreamListener* listener) {
  auto s = std::make_shared<Impl::Stream>(impl_->io);
  s->id = impl_->next_stream++;
  s->listener = listener;
  s->peer = dst;
  impl_->streams[s->id] = s;
  impl_->enqueue(s, ByteView(reinterpret_cast<const std::uint8_t*>(service.data()), service.size()));
  if (!dst.is_ipv4_mapped()) {
    // Report asynchronously, like any other connect failure.
    asio::post(impl_->io, [self = impl_, s] {
      if (!self->stopped && self->streams.contains(s->id)) self->drop(s, "connect");
    });
    return s->id;
  }
  s->socket.async_connect(tcp::endpoint(to_ip(dst), dst.port), [self = impl_, s](boost::system::error_code ec) {
    if (self->stopped || !self->streams.contains(s->id)) return;
    if (ec) return self->drop(s, "connect");
    boost::system::error_code ec2;
    s->socket.set_option(tcp::no_delay(true), ec2);
    s->connected = true;
    self->pump(s);
    self->read_header(s);
  });
  return s->id;
}

void RealTransport::stream_send(StreamId id, ByteView message) {
  auto it = impl_->streams.find(id);
  if (it == impl_->streams.end() || it->second->closing) return;
  impl_->enqueue(it->second, message);
}

void RealTransport::stream_close(StreamId id) {
  auto it = impl_->streams.find(id);
  if (it == impl_->streams.end()) return;
  auto s = it->second;
  s->closing = true;
  impl_->pump(s);
}

}  // namespace collab::peerd
