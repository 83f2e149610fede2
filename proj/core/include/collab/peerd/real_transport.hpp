#pragma once

#include <memory>

#include <boost/asio/io_context.hpp>

#include "collab/netsim/transport.hpp"

namespace collab::peerd {

// Socket-backed Transport: UDP for datagrams, TCP for streams, both on the
// listen address/port. Every stream frame is a big-endian u32 length plus
// body; the first frame a connector sends names the service.
//
// Everything runs on the given io_context, which must be driven by exactly
// one thread. now() is milliseconds since construction on a steady clock.
class RealTransport final : public netsim::Transport {
 public:
  // listen must be an IPv4 address. Throws Error(Errc::io) if either socket
  // cannot bind.
  RealTransport(boost::asio::io_context& io, const netsim::EndpointAddr& listen);
  ~RealTransport() override;

  const netsim::EndpointAddr& local_addr() const override;
  netsim::SimTime now() const override;
  void send(const netsim::EndpointAddr& dst, ByteView payload) override;
  void set_receiver(std::function<void(const netsim::Datagram&)> handler) override;
  netsim::TimerId schedule(netsim::SimTime delay, std::function<void()> fn) override;
  void cancel(netsim::TimerId id) override;
  void listen(const std::string& service, netsim::StreamListener* listener) override;
  netsim::StreamId connect(const netsim::EndpointAddr& dst, const std::string& service,
                           netsim::StreamListener* listener) override;
  void stream_send(netsim::StreamId id, ByteView message) override;
  void stream_close(netsim::StreamId id) override;

  struct Impl;

 private:
  std::shared_ptr<Impl> impl_;
};

}  // namespace collab::peerd
